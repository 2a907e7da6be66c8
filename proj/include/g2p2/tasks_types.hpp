#pragma once

#include <map>
#include <utility>
#include <vector>

namespace g2p2 {

// One N-way K-shot episode. Support, validation, and query are pairwise
// disjoint; query pairs are (node id, class id).
struct FewShotTask {
  std::vector<int> class_ids;  // ascending, size N
  std::map<int, std::vector<int>> support;     // class id -> K node ids
  std::map<int, std::vector<int>> validation;  // class id -> K node ids
  std::vector<std::pair<int, int>> query;

  std::size_t ways() const { return class_ids.size(); }
  // Support nodes flattened class-ascending (node-ascending within a class).
  std::vector<int> support_nodes() const;
  // Task-local index of a class id, or -1.
  int class_index(int class_id) const;
};

}  // namespace g2p2
