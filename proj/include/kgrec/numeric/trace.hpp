#pragma once

// Parameters and the forward trace used for reverse-mode gradients.
//
// Every op appends one backward closure to the trace while it runs forward.
// ForwardTrace::backward seeds d(loss)=1 and replays the closures in reverse,
// each exactly once. Parameter gradients accumulate into Parameter::grad.

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "kgrec/numeric/matrix.hpp"

namespace kgrec::numeric {

struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
};

class ParamStore {
public:
    ParamStore() = default;
    ParamStore(const ParamStore& other);
    ParamStore& operator=(const ParamStore& other);
    ParamStore(ParamStore&&) noexcept = default;
    ParamStore& operator=(ParamStore&&) noexcept = default;

    // Throws InvalidConfig on a duplicate name.
    Parameter& add(std::string name, Matrix init);

    Parameter& at(std::string_view name);
    const Parameter& at(std::string_view name) const;
    Parameter* find(std::string_view name);
    const Parameter* find(std::string_view name) const;
    bool contains(std::string_view name) const { return find(name) != nullptr; }

    void zero_grad();
    std::size_t size() const noexcept { return params_.size(); }
    std::size_t total_values() const noexcept;
    std::vector<std::string> names() const;

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    // Same names, shapes and bitwise-equal values.
    friend bool operator==(const ParamStore& a, const ParamStore& b);

private:
    std::deque<Parameter> params_;  // stable addresses
};

struct Node {
    Matrix value;
    Matrix grad;
};

using Var = std::shared_ptr<Node>;

class ForwardTrace {
public:
    // A non-recording trace runs forward only (inference).
    explicit ForwardTrace(bool record = true) : record_(record) {}

    bool recording() const noexcept { return record_; }

    Var constant(Matrix value) const;
    Var make(Matrix value) const;

    void on_backward(std::function<void()> fn);

    // Records the sign pattern of ReLU pre-activations; finite-difference
    // checks compare it across perturbations to skip kink coordinates.
    void note_kinks(const Matrix& pre_activation);
    std::uint64_t kink_signature() const noexcept { return kink_hash_; }

    // Replays the recorded closures once. Throws if called twice.
    void backward(const Var& scalar_loss);

    std::size_t recorded() const noexcept { return recorded_; }
    std::size_t replayed() const noexcept { return replayed_; }

private:
    bool record_;
    bool consumed_ = false;
    std::vector<std::function<void()>> ops_;
    std::size_t recorded_ = 0;
    std::size_t replayed_ = 0;
    std::uint64_t kink_hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace kgrec::numeric
