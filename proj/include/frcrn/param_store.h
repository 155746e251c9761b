// Copyright 2026 frcrn-cpp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <map>
#include <string>
#include <vector>

#include "frcrn/tensor.h"

namespace frcrn {

// Named learnable tensors plus non-trainable buffers (running statistics).
// Iteration order is the name order, so walking the store is deterministic.
class ParameterStore {
 public:
  struct Entry {
    Tensor tensor;
    bool trainable = true;
  };

  // Returns the existing entry when the name is already present (checkpoint
  // loads pre-populate the store); otherwise adopts `init`.
  Tensor obtain(const std::string& name, Tensor init, bool trainable = true);

  bool has(const std::string& name) const { return entries_.count(name) > 0; }
  Tensor get(const std::string& name) const;
  void put(const std::string& name, Tensor t, bool trainable);

  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Tensor>> trainable() const;
  int64_t trainable_scalars() const;
  int64_t total_scalars() const;

  void zero_grads();
  // Overwrites values (not identities) from a same-shaped store.
  void copy_values_from(const ParameterStore& other);

 private:
  std::map<std::string, Entry> entries_;
};

}  // namespace frcrn
