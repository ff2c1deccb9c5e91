#pragma once

// Fixtures shared by the unit and acceptance tests.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kgrec/kg_store.hpp"
#include "kgrec/mkr.hpp"
#include "kgrec/numeric/rng.hpp"
#include "kgrec/preprocess.hpp"

namespace kgrec::testing {

// Directory holding the checked-in fixture files.
std::filesystem::path data_dir();

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& tag);

// 5 users, 5 items, 8 triples, d = 4, every side-information flag on.
// Parameters are redrawn uniform in [-1, 1] so no gradient is tiny.
struct ToyInstance {
    mkr::MkrModel model;
    mkr::RsBatch rs;
    mkr::KgBatch kg;
};
ToyInstance make_toy_instance(std::uint64_t seed = 0);

// Planted rank-2 preference data: user and item factors ~ N(0, 1) and
// label = [u . v > 0] for every (user, item) pair.
struct PlantedData {
    std::vector<prep::Interaction> rows;
    prep::Counts counts;
};
PlantedData make_planted(std::size_t n_user, std::size_t n_item, std::uint64_t seed);

// Random graph whose labels mix CSV/N-Triples metacharacters (comma, quote,
// angle brackets, percent, backslash, tab, newline) with non-ASCII text.
kg::KnowledgeGraph random_graph(numeric::Rng& rng, std::size_t max_triples = 30);

// Sets every parameter value to `v`.
void fill_params(mkr::MkrModel& model, double v);

}  // namespace kgrec::testing
