#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kgrec/ablation.hpp"
#include "kgrec/checkpoint.hpp"
#include "kgrec/errors.hpp"
#include "kgrec/ingest.hpp"
#include "kgrec/kg_store.hpp"
#include "kgrec/latency.hpp"
#include "kgrec/mkr.hpp"
#include "kgrec/numeric/kernels.hpp"
#include "kgrec/numeric/rng.hpp"
#include "kgrec/predict.hpp"
#include "kgrec/preprocess.hpp"

namespace kgrec::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

kg::Dialect dialect_for(const std::string& path, const std::string& explicit_format) {
    if (!explicit_format.empty()) {
        if (auto d = kg::dialect_from_name(explicit_format)) return *d;
        throw UsageError("unknown format '" + explicit_format + "' (expected nt or csv)");
    }
    if (auto d = kg::dialect_from_path(path)) return *d;
    throw UsageError("cannot infer the format of '" + path + "'; pass --format");
}

kg::KnowledgeGraph read_graph(const std::string& path, const std::string& format) {
    return kg::parse(ingest::read_text_file(path), dialect_for(path, format));
}

void write_file(const fs::path& path, std::string_view text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    out.close();
    if (!out) throw IoError("error writing " + path.string());
}

void write_graph(const kg::KnowledgeGraph& graph, const std::string& path, const std::string& format, bool canonical) {
    write_file(path, kg::serialize(graph, dialect_for(path, format), {canonical}));
}

std::ostream& full_precision(std::ostream& out) {
    return out << std::setprecision(std::numeric_limits<double>::max_digits10);
}

// ------------------------------------------------------------- dataset load

struct LoadedDataset {
    std::string name;
    std::vector<ingest::UserRecord> users;
    std::vector<prep::ItemKey> items;
    std::vector<kg::TripleDescriptor> triples;
    std::vector<ingest::RatingRecord> ratings;
};

struct DatasetArgs {
    std::string dataset = "movielens";
    std::string input;
    std::string credits;
    std::string posters;
};

void add_dataset_options(CLI::App* cmd, DatasetArgs& args) {
    cmd->add_option("input", args.input, "Dataset directory")->required();
    cmd->add_option("--dataset", args.dataset, "movielens or bookcrossing")
        ->check(CLI::IsMember({"movielens", "bookcrossing"}));
    cmd->add_option("--credits", args.credits, "movie_credits.csv (MovieLens)");
    cmd->add_option("--posters", args.posters, "Poster image directory (MovieLens)");
}

LoadedDataset load_dataset(const DatasetArgs& args) {
    LoadedDataset out;
    out.name = args.dataset;
    if (args.dataset == "movielens") {
        ingest::MovieLensOptions options;
        if (!args.credits.empty()) options.credits = args.credits;
        if (!args.posters.empty()) options.posters = args.posters;
        auto data = ingest::load_movielens(args.input, options);
        out.users = std::move(data.users);
        out.items = prep::movie_items(data.movies);
        for (const auto& m : data.movies) {
            auto t = ingest::extract_movie_triples(m);
            out.triples.insert(out.triples.end(), t.begin(), t.end());
        }
        out.ratings = std::move(data.ratings);
    } else {
        auto data = ingest::load_bookcrossing(args.input);
        out.users = std::move(data.users);
        out.items = prep::book_items(data.books);
        for (const auto& b : data.books) {
            auto t = ingest::extract_book_triples(b);
            out.triples.insert(out.triples.end(), t.begin(), t.end());
        }
        out.ratings = std::move(data.ratings);
    }
    return out;
}

// ------------------------------------------------------------ model options

struct ModelArgs {
    mkr::Hyperparams hyper;
    std::string config = "baseline";
};

void add_hyper_options(CLI::App* cmd, mkr::Hyperparams& h) {
    cmd->add_option("--seed", h.seed, "Random seed")->capture_default_str();
    cmd->add_option("--dim", h.dim, "Embedding width d")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--epochs", h.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--lr", h.learning_rate, "Adam learning rate")->capture_default_str();
    cmd->add_option("--l2", h.l2, "L2 regularization weight")->capture_default_str();
    cmd->add_option("--batch-size", h.batch_size, "Minibatch size")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--kge-interval", h.kge_interval, "Epochs between KGE passes")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--cc-layers", h.cc_layers, "Cross-compress layers")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--mlp-layers", h.mlp_layers, "Hidden layers in the user and relation stacks")->capture_default_str();
    cmd->add_option("--rs-weight", h.rs_weight, "Weight of the RS loss")->capture_default_str();
    cmd->add_option("--kg-weight", h.kg_weight, "Weight of the KG loss")->capture_default_str();
}

std::vector<std::string> row_names() {
    std::vector<std::string> names;
    for (const auto& row : eval::ablation_rows()) names.emplace_back(row.name);
    return names;
}

mkr::SideInfoConfig parse_config(const std::string& name) {
    if (auto c = eval::config_for_row(name)) return *c;
    throw UsageError("unknown --config '" + name + "'");
}

nlohmann::json hyper_json(const mkr::Hyperparams& h) {
    return {{"dim", h.dim},
            {"learning_rate", h.learning_rate},
            {"l2", h.l2},
            {"batch_size", h.batch_size},
            {"epochs", h.epochs},
            {"kge_interval", h.kge_interval},
            {"cc_layers", h.cc_layers},
            {"mlp_layers", h.mlp_layers},
            {"rs_weight", h.rs_weight},
            {"kg_weight", h.kg_weight}};
}

void write_metrics_line(std::ostream& out, std::string_view split, const eval::MetricsReport& m) {
    out << split << ",";
    if (m.auc) out << *m.auc;
    out << "," << m.acc << ",";
    if (m.ndcg) out << *m.ndcg;
    out << "," << m.n_examples << "\n";
}

// Hashes of every prepared-data file, for the run metadata.
nlohmann::json dataset_hashes(const fs::path& dir) {
    nlohmann::json files = nlohmann::json::object();
    for (const char* name : {"kg_final.tsv", "user_final.tsv", "ratings_final.tsv", "entities.tsv", "relations.tsv",
                             "items.tsv", "users.tsv", "user_vocab.tsv"}) {
        files[name] = prep::sha256_file(dir / name);
    }
    return files;
}

// -------------------------------------------------------------- subcommands

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Knowledge-graph side information for multi-task recommendation", "kgrec"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(mkr::build_version()));

    // ingest
    DatasetArgs ingest_args;
    std::string ingest_out, ingest_format;
    auto* ingest_cmd = app.add_subcommand("ingest", "Extract side-information triples from a dataset");
    add_dataset_options(ingest_cmd, ingest_args);
    ingest_cmd->add_option("-o,--output", ingest_out, "Output graph (.nt or .csv)")->required();
    ingest_cmd->add_option("--format", ingest_format, "nt or csv (default: from the extension)");

    // build-kg
    std::vector<std::string> build_inputs;
    std::string build_out, build_format;
    bool build_canonical = false;
    auto* build_cmd = app.add_subcommand("build-kg", "Load side-information files into one graph");
    build_cmd->add_option("inputs", build_inputs, "Triple files (.nt or .csv)")->required();
    build_cmd->add_option("-o,--output", build_out, "Output graph")->required();
    build_cmd->add_option("--format", build_format, "Output format");
    build_cmd->add_flag("--canonical", build_canonical, "Sort triples by label");

    // fuse
    std::string fuse_a, fuse_b, fuse_out, fuse_format;
    bool fuse_canonical = false;
    auto* fuse_cmd = app.add_subcommand("fuse", "Merge two graphs, identifying nodes by label");
    fuse_cmd->add_option("a", fuse_a, "First graph")->required();
    fuse_cmd->add_option("b", fuse_b, "Second graph")->required();
    fuse_cmd->add_option("-o,--output", fuse_out, "Output graph")->required();
    fuse_cmd->add_option("--format", fuse_format, "Output format");
    fuse_cmd->add_flag("--canonical", fuse_canonical, "Sort triples by label");

    // convert
    std::string convert_in, convert_out, convert_from, convert_to;
    bool convert_canonical = false;
    auto* convert_cmd = app.add_subcommand("convert", "Convert a graph between N-Triples and property CSV");
    convert_cmd->add_option("input", convert_in, "Input graph")->required();
    convert_cmd->add_option("-o,--output", convert_out, "Output graph")->required();
    convert_cmd->add_option("--from", convert_from, "Input format");
    convert_cmd->add_option("--to", convert_to, "Output format");
    convert_cmd->add_flag("--canonical", convert_canonical, "Sort triples by label");

    // view
    std::string view_in, view_out, view_format;
    auto* view_cmd = app.add_subcommand("view", "Export a graph as Graphviz DOT");
    view_cmd->add_option("input", view_in, "Input graph")->required();
    view_cmd->add_option("-o,--output", view_out, "DOT file (default: standard output)");
    view_cmd->add_option("--format", view_format, "Input format");

    // preprocess
    DatasetArgs prep_args;
    std::vector<std::string> prep_kg;
    std::string prep_out;
    std::optional<double> prep_threshold;
    prep::PrepareOptions prep_options;
    auto* prep_cmd = app.add_subcommand("preprocess", "Encode a dataset into the TSV files used for training");
    add_dataset_options(prep_cmd, prep_args);
    prep_cmd->add_option("--kg", prep_kg, "Side-information graphs to use instead of the dataset's own triples");
    prep_cmd->add_option("-o,--output", prep_out, "Output directory")->required();
    prep_cmd->add_option("--threshold", prep_threshold, "Positive rating threshold (default 4 MovieLens, 6 Book-Crossing)");
    prep_cmd->add_option("--negative-ratio", prep_options.negative_ratio, "Negatives per positive")->capture_default_str();
    prep_cmd->add_option("--seed", prep_options.seed, "Negative-sampling seed")->capture_default_str();

    // train
    ModelArgs train_args;
    std::string train_data, train_out, train_history;
    auto* train_cmd = app.add_subcommand("train", "Train a model on preprocessed data");
    train_cmd->add_option("--data", train_data, "Preprocessed directory")->required();
    train_cmd->add_option("-o,--output", train_out, "Checkpoint path")->required();
    train_cmd->add_option("--config", train_args.config, "Side-information row")
        ->capture_default_str()
        ->check(CLI::IsMember(row_names()));
    train_cmd->add_option("--history", train_history, "Per-epoch CSV");
    add_hyper_options(train_cmd, train_args.hyper);

    // evaluate
    std::string evaluate_model, evaluate_data;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a checkpoint on the train/eval/test splits");
    evaluate_cmd->add_option("--model", evaluate_model, "Checkpoint")->required();
    evaluate_cmd->add_option("--data", evaluate_data, "Preprocessed directory")->required();

    // predict
    std::string predict_model, predict_user, predict_item;
    std::optional<std::string> predict_age, predict_job;
    auto* predict_cmd = app.add_subcommand("predict", "Probability that a user likes an item");
    predict_cmd->add_option("--model", predict_model, "Checkpoint")->required();
    predict_cmd->add_option("--user", predict_user, "Source user id")->required();
    predict_cmd->add_option("--item", predict_item, "Source item id")->required();
    predict_cmd->add_option("--age", predict_age, "Age category for an unknown user");
    predict_cmd->add_option("--job", predict_job, "Job category for an unknown user");

    // bench
    std::string bench_model;
    std::size_t bench_runs = 100, bench_warmup = 5;
    std::uint64_t bench_seed = 0;
    double bench_baseline = eval::kBaselineMs;
    auto* bench_cmd = app.add_subcommand("bench", "Time the predict pipeline over repeated requests");
    bench_cmd->add_option("--model", bench_model, "Checkpoint")->required();
    bench_cmd->add_option("--runs", bench_runs, "Timed runs")->capture_default_str()->check(CLI::PositiveNumber);
    bench_cmd->add_option("--warmup", bench_warmup, "Untimed warm-up runs")->capture_default_str();
    bench_cmd->add_option("--seed", bench_seed, "Request sampler seed")->capture_default_str();
    bench_cmd->add_option("--baseline-ms", bench_baseline, "Pass threshold")->capture_default_str();

    // ablate
    mkr::Hyperparams ablate_hyper;
    std::string ablate_data, ablate_out;
    std::vector<std::string> ablate_rows;
    std::size_t ablate_seeds = 1;
    auto* ablate_cmd = app.add_subcommand("ablate", "Train every side-information row and tabulate AUC/ACC");
    ablate_cmd->add_option("--data", ablate_data, "Preprocessed directory")->required();
    ablate_cmd->add_option("-o,--output", ablate_out, "CSV path (default: standard output)");
    ablate_cmd->add_option("--config", ablate_rows, "Restrict to these rows")->check(CLI::IsMember(row_names()));
    ablate_cmd->add_option("--seeds", ablate_seeds, "Seeds seed..seed+N-1")->capture_default_str()->check(CLI::PositiveNumber);
    add_hyper_options(ablate_cmd, ablate_hyper);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << mkr::build_version() << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "kgrec: " << e.what() << "\n";
        return kExitUsage;
    }

    if (ingest_cmd->parsed()) {
        auto data = load_dataset(ingest_args);
        kg::KnowledgeGraph graph;
        for (const auto& t : data.triples) graph.add_triple(t.head, t.relation, t.tail);
        write_graph(graph, ingest_out, ingest_format, false);
        err << "ingest: " << graph.triple_count() << " triples, " << graph.entity_count() << " entities\n";
    } else if (build_cmd->parsed()) {
        kg::KnowledgeGraph graph;
        for (const auto& path : build_inputs) {
            for (const auto& t : ingest::load_side_info_file(path, dialect_for(path, ""))) {
                graph.add_triple(t.head, t.relation, t.tail);
            }
        }
        write_graph(graph, build_out, build_format, build_canonical);
        err << "build-kg: " << graph.triple_count() << " triples\n";
    } else if (fuse_cmd->parsed()) {
        auto fused = kg::fuse(read_graph(fuse_a, ""), read_graph(fuse_b, ""));
        write_graph(fused, fuse_out, fuse_format, fuse_canonical);
        err << "fuse: " << fused.triple_count() << " triples, " << fused.entity_count() << " entities\n";
    } else if (convert_cmd->parsed()) {
        const auto from = dialect_for(convert_in, convert_from);
        const auto to = dialect_for(convert_out, convert_to);
        write_file(convert_out, kg::convert(ingest::read_text_file(convert_in), from, to, {convert_canonical}));
    } else if (view_cmd->parsed()) {
        const std::string dot = kg::export_dot(read_graph(view_in, view_format));
        if (view_out.empty()) {
            out << dot;
        } else {
            write_file(view_out, dot);
        }
    } else if (prep_cmd->parsed()) {
        auto data = load_dataset(prep_args);
        if (!prep_kg.empty()) {
            std::vector<fs::path> paths(prep_kg.begin(), prep_kg.end());
            data.triples.clear();
            for (const auto& path : paths) {
                auto t = ingest::load_side_info_file(path, dialect_for(path.string(), ""));
                data.triples.insert(data.triples.end(), t.begin(), t.end());
            }
        }
        prep_options.threshold = prep_threshold.value_or(data.name == "movielens" ? 4.0 : 6.0);
        prep::PrepareStats stats;
        auto prepared = prep::prepare(data.users, data.items, data.triples, data.ratings, prep_options, &stats);
        prepared.dataset = data.name;
        prep::save_prepared(prepared, prep_out);
        const auto c = prepared.counts();
        err << "preprocess: " << c.n_user << " users, " << c.n_item << " items, " << c.n_entity << " entities, "
            << c.n_relation << " relations, " << prepared.kg.size() << " triples, " << stats.positives
            << " positives, " << stats.negatives << " negatives\n";
    } else if (train_cmd->parsed()) {
        const auto config = parse_config(train_args.config);
        const auto data = prep::load_prepared(train_data);
        const auto splits = prep::split_622(data.interactions, train_args.hyper.seed);
        auto model = mkr::build_model(data.counts(), train_args.hyper, config);
        model.vocab = mkr::vocab_from(data);
        const auto kg = mkr::select_kg_triples(data, config);

        std::ofstream history;
        if (!train_history.empty()) {
            history.open(train_history);
            if (!history) throw IoError("cannot write " + train_history);
            history << "epoch,rs_loss,kg_loss,eval_auc,eval_acc\n";
        }
        auto result = mkr::train(model, splits, kg, [&](const mkr::EpochRecord& r) {
            err << "epoch " << r.epoch << " rs_loss " << r.rs_loss;
            if (r.kg_loss) err << " kg_loss " << *r.kg_loss;
            if (r.eval.auc) err << " eval_auc " << *r.eval.auc;
            err << " eval_acc " << r.eval.acc << "\n";
            if (history.is_open()) {
                history << r.epoch << ',' << r.rs_loss << ',';
                if (r.kg_loss) history << *r.kg_loss;
                history << ',';
                if (r.eval.auc) history << *r.eval.auc;
                history << ',' << r.eval.acc << '\n';
            }
        });
        if (result.holdout_hash_before != result.holdout_hash_after) {
            throw Error("eval/test rows changed during training");
        }
        mkr::save_checkpoint(model, train_out);

        nlohmann::json meta;
        meta["seed"] = train_args.hyper.seed;
        meta["config"] = train_args.config;
        meta["flags"] = hyper_json(train_args.hyper);
        meta["dataset"] = {{"name", data.dataset},
                           {"files", dataset_hashes(train_data)},
                           {"interactions_sha256", prep::hash_interactions(data.interactions)},
                           {"holdout_sha256", result.holdout_hash_before}};
        meta["git_describe"] = std::string(mkr::build_version());
        write_file(train_out + ".json", meta.dump(2) + "\n");

        out << "split,auc,acc,ndcg,n\n";
        write_metrics_line(out, "test", mkr::evaluate_rows(model, splits.test));
    } else if (evaluate_cmd->parsed()) {
        const auto model = mkr::load_checkpoint(evaluate_model);
        const auto data = prep::load_prepared(evaluate_data);
        if (!(data.counts() == model.counts)) throw InvalidConfig("checkpoint and data have different vocabularies");
        const auto splits = prep::split_622(data.interactions, model.hyper.seed);
        out << "split,auc,acc,ndcg,n\n";
        write_metrics_line(out, "train", mkr::evaluate_rows(model, splits.train));
        write_metrics_line(out, "eval", mkr::evaluate_rows(model, splits.eval));
        write_metrics_line(out, "test", mkr::evaluate_rows(model, splits.test));
    } else if (predict_cmd->parsed()) {
        if (predict_age.has_value() != predict_job.has_value()) throw UsageError("--age and --job go together");
        const auto model = mkr::load_checkpoint(predict_model);
        std::optional<mkr::Fallback> fallback;
        if (predict_age) fallback = mkr::Fallback{*predict_age, *predict_job};
        full_precision(out) << mkr::predict_score(model, predict_user, predict_item, fallback) << "\n";
    } else if (bench_cmd->parsed()) {
        // Timing is single-threaded by contract.
        numeric::kernels::ScopedBackend serial(numeric::kernels::Backend::Serial);
        const auto model = mkr::load_checkpoint(bench_model);
        const auto& users = model.vocab.users.users;
        const auto& items = model.vocab.items;
        if (users.size() == 0 || items.size() == 0) throw InvalidConfig("checkpoint has no users or items");
        numeric::Rng rng(bench_seed);
        std::vector<std::pair<std::string, std::string>> requests;
        for (std::size_t i = 0; i < bench_runs + bench_warmup; ++i) {
            requests.emplace_back(users.label(static_cast<std::uint32_t>(rng.uniform_index(users.size()))),
                                  items.label(static_cast<std::uint32_t>(rng.uniform_index(items.size()))));
        }
        volatile double sink = 0.0;
        auto report = eval::latency_bench(
            [&](std::size_t i) { sink = sink + mkr::predict_score(model, requests[i].first, requests[i].second); },
            bench_runs, bench_warmup);
        eval::write_latency_report(out, report, bench_baseline);
    } else if (ablate_cmd->parsed()) {
        const auto data = prep::load_prepared(ablate_data);
        std::vector<eval::AblationRow> rows;
        for (const auto& row : eval::ablation_rows()) {
            if (ablate_rows.empty() || std::find(ablate_rows.begin(), ablate_rows.end(), row.name) != ablate_rows.end()) {
                rows.push_back(row);
            }
        }
        eval::AblationOptions options;
        options.hyper = ablate_hyper;
        options.seeds.clear();
        for (std::size_t k = 0; k < ablate_seeds; ++k) options.seeds.push_back(ablate_hyper.seed + k);
        options.on_run = [&](const eval::AblationRun& r) {
            err << "ablate: " << r.config << " seed " << r.seed << " test_auc "
                << (r.test.auc ? std::to_string(*r.test.auc) : std::string("n/a")) << "\n";
        };
        auto runs = eval::run_ablation(data, rows, options);
        if (ablate_out.empty()) {
            eval::write_ablation_csv(out, rows, runs);
        } else {
            std::ofstream csv(ablate_out);
            if (!csv) throw IoError("cannot write " + ablate_out);
            eval::write_ablation_csv(csv, rows, runs);
            if (ablate_seeds > 1) {
                const fs::path base(ablate_out);
                const fs::path stem = base.parent_path() / base.stem();
                std::ofstream sd(stem.string() + ".sd.csv");
                eval::write_ablation_sd_csv(sd, rows, runs);
                std::ofstream all(stem.string() + ".runs.csv");
                eval::write_ablation_runs_csv(all, runs);
            }
        }
    }
    return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    try {
        return run(argc, argv, out, err);
    } catch (const UsageError& e) {
        err << "kgrec: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "kgrec: " << e.what() << "\n";
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "kgrec: " << e.what() << "\n";
        return kExitData;
    }
}

}  // namespace kgrec::cli
