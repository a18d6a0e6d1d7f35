#include "sac/params.hpp"

#include "sac/error.hpp"

namespace sac {

ParameterSet::ParameterSet(const ParameterSet& other) {
  items_.reserve(other.items_.size());
  for (const auto& p : other.items_) items_.push_back(std::make_unique<Parameter>(*p));
}

ParameterSet& ParameterSet::operator=(const ParameterSet& other) {
  if (this != &other) {
    ParameterSet copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Parameter& ParameterSet::add(std::string name, std::string group, Tensor init) {
  if (find(name)) fail(ErrorKind::kConfig, "duplicate parameter name " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->group = std::move(group);
  p->grad = Tensor(init.shape());
  p->value = std::move(init);
  items_.push_back(std::move(p));
  return *items_.back();
}

Parameter& ParameterSet::get(const std::string& name) {
  for (auto& p : items_) {
    if (p->name == name) return *p;
  }
  fail(ErrorKind::kConfig, "unknown parameter " + name);
}

const Parameter& ParameterSet::get(const std::string& name) const {
  const Parameter* p = find(name);
  if (!p) fail(ErrorKind::kConfig, "unknown parameter " + name);
  return *p;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : items_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

void ParameterSet::zero_grad() {
  for (auto& p : items_) p->grad.fill(0.0);
}

void ParameterSet::clear_touched() {
  for (auto& p : items_) p->touched = false;
}

std::size_t ParameterSet::numel() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p->value.size();
  return n;
}

std::size_t ParameterSet::numel_in_group(const std::string& group) const {
  std::size_t n = 0;
  for (const auto& p : items_) {
    if (p->group == group) n += p->value.size();
  }
  return n;
}

std::size_t ParameterSet::touched_numel() const {
  std::size_t n = 0;
  for (const auto& p : items_) {
    if (p->touched) n += p->value.size();
  }
  return n;
}

std::vector<std::string> ParameterSet::touched_names() const {
  std::vector<std::string> names;
  for (const auto& p : items_) {
    if (p->touched) names.push_back(p->name);
  }
  return names;
}

}  // namespace sac
