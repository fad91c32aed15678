#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hcma/autograd.hpp"

namespace hcma::ad {

// Ordered collection of named trainable leaves. Order is insertion order and
// defines the flat layout used by the optimizer and checkpoints.
class ParameterSet {
 public:
  Var& add(const std::string& name, Matrix init);
  Var& get(const std::string& name);
  const Var& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t size() const { return vars_.size(); }
  std::size_t scalar_count() const;
  const std::vector<std::string>& names() const { return names_; }
  std::vector<Var>& vars() { return vars_; }
  const std::vector<Var>& vars() const { return vars_; }

  void zero_grad();
  std::vector<double> flat_values() const;
  void set_flat_values(const std::vector<double>& flat);
  // Missing gradients (parameter unused in the last graph) read as zero.
  std::vector<double> flat_grads() const;

  // Appends every entry of `other` with the given name prefix. Vars are
  // shared, not copied.
  void merge(const std::string& prefix, const ParameterSet& other);
  // Deep copy: fresh leaves holding the same values.
  ParameterSet clone() const;

 private:
  std::vector<std::string> names_;
  std::vector<Var> vars_;
};

// Uniform(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
Matrix xavier_uniform(std::size_t rows, std::size_t cols, std::uint64_t seed);

}  // namespace hcma::ad
