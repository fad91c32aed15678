#include "hcma/parameters.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hcma/error.hpp"

namespace hcma::ad {

Var& ParameterSet::add(const std::string& name, Matrix init) {
  if (contains(name)) throw ConfigError("duplicate parameter '" + name + "'");
  names_.push_back(name);
  vars_.emplace_back(std::move(init), true);
  return vars_.back();
}

bool ParameterSet::contains(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

Var& ParameterSet::get(const std::string& name) {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return vars_[static_cast<std::size_t>(it - names_.begin())];
}

const Var& ParameterSet::get(const std::string& name) const {
  return const_cast<ParameterSet*>(this)->get(name);
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const Var& v : vars_) n += v.value().size();
  return n;
}

void ParameterSet::zero_grad() {
  for (Var& v : vars_) v.zero_grad();
}

std::vector<double> ParameterSet::flat_values() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const Var& v : vars_) {
    out.insert(out.end(), v.value().data.begin(), v.value().data.end());
  }
  return out;
}

void ParameterSet::set_flat_values(const std::vector<double>& flat) {
  if (flat.size() != scalar_count()) {
    throw DimensionMismatchError("set_flat_values: size mismatch");
  }
  std::size_t off = 0;
  for (Var& v : vars_) {
    auto& d = v.mutable_value().data;
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), d.size(), d.begin());
    off += d.size();
  }
}

std::vector<double> ParameterSet::flat_grads() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const Var& v : vars_) {
    if (v.grad().data.empty()) {
      out.insert(out.end(), v.value().size(), 0.0);
    } else {
      out.insert(out.end(), v.grad().data.begin(), v.grad().data.end());
    }
  }
  return out;
}

void ParameterSet::merge(const std::string& prefix, const ParameterSet& other) {
  for (std::size_t i = 0; i < other.size(); ++i) {
    const std::string name = prefix + other.names_[i];
    if (contains(name)) throw ConfigError("duplicate parameter '" + name + "'");
    names_.push_back(name);
    vars_.push_back(other.vars_[i]);
  }
}

ParameterSet ParameterSet::clone() const {
  ParameterSet out;
  for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], vars_[i].value());
  return out;
}

Matrix xavier_uniform(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-limit, limit);
  Matrix m(rows, cols);
  for (double& v : m.data) v = u(rng);
  return m;
}

}  // namespace hcma::ad
