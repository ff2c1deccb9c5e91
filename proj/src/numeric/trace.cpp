#include "kgrec/numeric/trace.hpp"

#include "kgrec/errors.hpp"

namespace kgrec::numeric {

ParamStore::ParamStore(const ParamStore& other) : params_(other.params_) {}

ParamStore& ParamStore::operator=(const ParamStore& other) {
    if (this != &other) params_ = other.params_;
    return *this;
}

Parameter& ParamStore::add(std::string name, Matrix init) {
    if (contains(name)) throw InvalidConfig("duplicate parameter name: " + name);
    Matrix grad(init.rows(), init.cols());
    params_.push_back(Parameter{std::move(name), std::move(init), std::move(grad)});
    return params_.back();
}

Parameter* ParamStore::find(std::string_view name) {
    for (auto& p : params_) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

const Parameter* ParamStore::find(std::string_view name) const {
    for (const auto& p : params_) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

Parameter& ParamStore::at(std::string_view name) {
    if (auto* p = find(name)) return *p;
    throw InvalidConfig("no parameter named " + std::string(name));
}

const Parameter& ParamStore::at(std::string_view name) const {
    if (const auto* p = find(name)) return *p;
    throw InvalidConfig("no parameter named " + std::string(name));
}

void ParamStore::zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
}

std::size_t ParamStore::total_values() const noexcept {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.name);
    return out;
}

bool operator==(const ParamStore& a, const ParamStore& b) {
    if (a.params_.size() != b.params_.size()) return false;
    for (std::size_t i = 0; i < a.params_.size(); ++i) {
        if (a.params_[i].name != b.params_[i].name || !(a.params_[i].value == b.params_[i].value)) return false;
    }
    return true;
}

Var ForwardTrace::constant(Matrix value) const {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    return node;
}

Var ForwardTrace::make(Matrix value) const {
    auto node = std::make_shared<Node>();
    if (record_) node->grad = Matrix(value.rows(), value.cols());
    node->value = std::move(value);
    return node;
}

void ForwardTrace::on_backward(std::function<void()> fn) {
    if (!record_) return;
    ops_.push_back(std::move(fn));
    ++recorded_;
}

void ForwardTrace::note_kinks(const Matrix& pre_activation) {
    for (double z : pre_activation.values()) {
        kink_hash_ ^= z > 0.0 ? 0x9E3779B97F4A7C15ULL : 0x632BE59BD9B4E019ULL;
        kink_hash_ *= 0x100000001b3ULL;
    }
}

void ForwardTrace::backward(const Var& scalar_loss) {
    if (!record_) throw Error("backward on a non-recording trace");
    if (consumed_) throw Error("trace already replayed");
    require_shape(scalar_loss->value.rows() == 1 && scalar_loss->value.cols() == 1, "backward needs a 1x1 loss");
    consumed_ = true;
    scalar_loss->grad[0] += 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
        (*it)();
        ++replayed_;
    }
    ops_.clear();
}

}  // namespace kgrec::numeric
