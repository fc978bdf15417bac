#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "npprov/graph.hpp"
#include "npprov/rng.hpp"
#include "npprov/tensor.hpp"

namespace npprov {

// Named learnable tensors in a stable insertion order (serialization and the
// optimizer both iterate in this order).
class ParamStore {
public:
    void add(const std::string& name, Tensor t) {
        if (index_.count(name)) throw ContractViolation("ParamStore: duplicate parameter '" + name + "'");
        index_[name] = names_.size();
        names_.push_back(name);
        tensors_.push_back(std::move(t));
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    Tensor& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractViolation("ParamStore: unknown parameter '" + name + "'");
        return tensors_[it->second];
    }
    const Tensor& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractViolation("ParamStore: unknown parameter '" + name + "'");
        return tensors_[it->second];
    }

    size_t size() const { return names_.size(); }
    const std::string& name(size_t i) const { return names_[i]; }
    Tensor& tensor(size_t i) { return tensors_[i]; }
    const Tensor& tensor(size_t i) const { return tensors_[i]; }

    int64_t total_elements() const {
        int64_t n = 0;
        for (const Tensor& t : tensors_) n += t.numel();
        return n;
    }

private:
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
    std::unordered_map<std::string, size_t> index_;
};

// Store snapshot registered as graph leaves; one per Graph.
struct BoundParams {
    std::unordered_map<std::string, Value> by_name;
    std::vector<Value> in_order;

    Value operator[](const std::string& name) const {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw ContractViolation("BoundParams: unknown parameter '" + name + "'");
        return it->second;
    }
};

inline BoundParams bind_params(Graph& g, const ParamStore& store) {
    BoundParams b;
    for (size_t i = 0; i < store.size(); ++i) {
        Value v = g.param(store.tensor(i));
        b.by_name.emplace(store.name(i), v);
        b.in_order.push_back(v);
    }
    return b;
}

// gradients for every parameter, aligned with store order
inline std::vector<Tensor> collect_grads(const Graph& g, const BoundParams& b) {
    std::vector<Tensor> out;
    out.reserve(b.in_order.size());
    for (const Value& v : b.in_order) out.push_back(g.grad_of(v));
    return out;
}

// uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) weights
inline Tensor init_uniform(Shape shape, int64_t fan_in, CounterRng& rng) {
    Tensor t(std::move(shape));
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (auto& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

}  // namespace npprov
