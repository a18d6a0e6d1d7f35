#pragma once

#include "sac/tensor.hpp"

#include <memory>
#include <string>
#include <vector>

namespace sac {

// A named learnable tensor with its gradient accumulator. Reads through
// `use()` are recorded so callers can audit which parameters a forward pass
// actually touched.
struct Parameter {
  std::string name;
  std::string group;
  Tensor value;
  Tensor grad;
  mutable bool touched = false;

  const Tensor& use() const {
    touched = true;
    return value;
  }
};

class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet& other);
  ParameterSet& operator=(const ParameterSet& other);
  ParameterSet(ParameterSet&&) noexcept = default;
  ParameterSet& operator=(ParameterSet&&) noexcept = default;

  Parameter& add(std::string name, std::string group, Tensor init);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  const Parameter* find(const std::string& name) const;

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }
  std::size_t size() const { return items_.size(); }

  void zero_grad();
  void clear_touched();
  std::size_t numel() const;
  std::size_t numel_in_group(const std::string& group) const;
  std::size_t touched_numel() const;
  std::vector<std::string> touched_names() const;

 private:
  std::vector<std::unique_ptr<Parameter>> items_;
};

}  // namespace sac
