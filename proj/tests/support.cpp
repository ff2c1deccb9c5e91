#include "support.hpp"

#include <unistd.h>

#include <atomic>

#include "kgrec/numeric/rng.hpp"

#ifndef KGREC_TEST_DATA_DIR
#error "KGREC_TEST_DATA_DIR must be defined"
#endif

namespace kgrec::testing {

namespace fs = std::filesystem;

fs::path data_dir() { return KGREC_TEST_DATA_DIR; }

fs::path scratch_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    fs::path dir = fs::temp_directory_path() /
                   ("kgrec_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ToyInstance make_toy_instance(std::uint64_t seed) {
    prep::Counts counts;
    counts.n_user = 5;
    counts.n_item = 5;
    counts.n_entity = 9;
    counts.n_relation = 3;
    counts.n_gender = 2;
    counts.n_age = 3;
    counts.n_job = 4;
    mkr::Hyperparams hyper;
    hyper.dim = 4;
    hyper.l2 = 0.01;
    hyper.seed = seed;
    ToyInstance toy{mkr::build_model(counts, hyper, {true, true, true}), {}, {}};

    numeric::Rng rng(seed + 1);
    for (auto& p : toy.model.params) {
        for (double& v : p.value.values()) v = rng.uniform(-1.0, 1.0);
    }
    for (std::uint32_t u = 0; u < 5; ++u) {
        toy.model.vocab.users.users.intern(std::to_string(u + 1));
        toy.model.vocab.users.features.push_back({u % 2, u % 3, u % 4});
    }
    for (const char* g : {"M", "F"}) toy.model.vocab.users.genders.intern(g);
    for (const char* a : {"1", "18", "25"}) toy.model.vocab.users.ages.intern(a);
    for (const char* j : {"0", "1", "2", "3"}) toy.model.vocab.users.jobs.intern(j);
    for (std::uint32_t i = 0; i < 5; ++i) toy.model.vocab.items.intern(std::to_string(i + 1));

    const std::vector<prep::Interaction> rows = {{0, 0, 1}, {0, 3, 0}, {1, 1, 1}, {1, 4, 0}, {2, 2, 1},
                                                 {2, 0, 0}, {3, 3, 1}, {3, 1, 0}, {4, 4, 1}, {4, 2, 0}};
    toy.rs = mkr::make_rs_batch(toy.model, rows);

    const std::uint32_t triples[8][3] = {{0, 0, 5}, {1, 0, 6}, {2, 1, 7}, {3, 1, 8},
                                         {4, 2, 5}, {0, 2, 7}, {1, 1, 8}, {2, 0, 6}};
    for (const auto& t : triples) {
        toy.kg.heads.push_back(t[0]);
        toy.kg.relations.push_back(t[1]);
        toy.kg.tails.push_back(t[2]);
        toy.kg.corrupt_tails.push_back(static_cast<std::uint32_t>(rng.uniform_index(counts.n_entity)));
    }
    return toy;
}

PlantedData make_planted(std::size_t n_user, std::size_t n_item, std::uint64_t seed) {
    numeric::Rng rng(seed);
    std::vector<double> uf(n_user * 2), vf(n_item * 2);
    for (double& x : uf) x = rng.normal(0.0, 1.0);
    for (double& x : vf) x = rng.normal(0.0, 1.0);
    PlantedData out;
    for (std::uint32_t u = 0; u < n_user; ++u) {
        for (std::uint32_t i = 0; i < n_item; ++i) {
            const double s = uf[2 * u] * vf[2 * i] + uf[2 * u + 1] * vf[2 * i + 1];
            out.rows.push_back({u, i, static_cast<std::uint8_t>(s > 0.0)});
        }
    }
    out.counts.n_user = n_user;
    out.counts.n_item = n_item;
    return out;
}

kg::KnowledgeGraph random_graph(numeric::Rng& rng, std::size_t max_triples) {
    static const std::vector<std::string> pieces = {"a", "B", "7", ",", "\"", "<", ">", "%", "%41", "\\", " ", "\t",
                                                    "\n", ".", "_", "#", "\xC3\xA9", "\xE6\x97\xA5", "\xF0\x9F\x8E\xAC"};
    auto label = [&] {
        std::string s = "x";  // labels never start or end with whitespace
        const std::size_t n = rng.uniform_index(6);
        for (std::size_t i = 0; i < n; ++i) s += pieces[rng.uniform_index(pieces.size())];
        return s + std::to_string(rng.uniform_index(8));
    };
    std::vector<std::string> entities(1 + rng.uniform_index(12)), relations(1 + rng.uniform_index(4));
    for (auto& e : entities) e = label();
    for (auto& r : relations) r = label();
    kg::KnowledgeGraph g;
    const std::size_t n = rng.uniform_index(max_triples + 1);
    for (std::size_t i = 0; i < n; ++i) {
        g.add_triple(entities[rng.uniform_index(entities.size())], relations[rng.uniform_index(relations.size())],
                     entities[rng.uniform_index(entities.size())]);
    }
    return g;
}

void fill_params(mkr::MkrModel& model, double v) {
    for (auto& p : model.params) p.value.fill(v);
}

}  // namespace kgrec::testing
