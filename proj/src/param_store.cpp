// Copyright 2026 frcrn-cpp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "frcrn/param_store.h"

#include <algorithm>

namespace frcrn {

Tensor ParameterStore::obtain(const std::string& name, Tensor init,
                              bool trainable) {
  auto it = entries_.find(name);
  if (it != entries_.end()) {
    if (it->second.tensor.shape() != init.shape())
      throw ShapeError("parameter '" + name + "' has shape " +
                       shape_str(it->second.tensor.shape()) +
                       ", expected " + shape_str(init.shape()));
    it->second.tensor.set_requires_grad(trainable);
    it->second.trainable = trainable;
    return it->second.tensor;
  }
  init.set_requires_grad(trainable);
  entries_[name] = Entry{init, trainable};
  return init;
}

Tensor ParameterStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw DataError("parameter '" + name + "' not found");
  return it->second.tensor;
}

void ParameterStore::put(const std::string& name, Tensor t, bool trainable) {
  t.set_requires_grad(trainable);
  entries_[name] = Entry{std::move(t), trainable};
}

std::vector<std::pair<std::string, Tensor>> ParameterStore::trainable() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& [name, e] : entries_)
    if (e.trainable) out.emplace_back(name, e.tensor);
  return out;
}

int64_t ParameterStore::trainable_scalars() const {
  int64_t n = 0;
  for (const auto& [name, e] : entries_)
    if (e.trainable) n += e.tensor.numel();
  return n;
}

int64_t ParameterStore::total_scalars() const {
  int64_t n = 0;
  for (const auto& [name, e] : entries_) n += e.tensor.numel();
  return n;
}

void ParameterStore::zero_grads() {
  for (auto& [name, e] : entries_) e.tensor.zero_grad();
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
  for (auto& [name, e] : entries_) {
    Tensor src = other.get(name);
    if (src.shape() != e.tensor.shape())
      throw ShapeError("copy_values_from: shape mismatch for '" + name + "'");
    auto dst = e.tensor.mutable_data();
    std::copy(src.data().begin(), src.data().end(), dst.begin());
  }
}

}  // namespace frcrn
