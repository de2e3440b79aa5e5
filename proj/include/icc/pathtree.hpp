#pragma once

#include <string>
#include <utility>
#include <vector>

namespace icc::pathtree {

/// Binary load-path tree over axes {A, B}. A node is identified by its
/// axis-label prefix string; the root is the empty string.
struct LoadPathTree {
  int depth = 5;

  bool valid_node(const std::string& id) const;
  std::size_t node_count() const;  // 2^(depth+1) - 1 including the root
};

/// Children of a non-leaf node: (prefix+A, prefix+B).
std::pair<std::string, std::string> children(const LoadPathTree& tree,
                                             const std::string& prefix);

/// All length-T paths whose first step is `first`, lexicographic order.
std::vector<std::string> enumerate_paths(int depth, char first);

/// All nodes (non-root) in the subtree rooted at the single-step node
/// `first`, ordered by depth then lexicographically. Includes that node.
std::vector<std::string> subtree_nodes(int depth, char first);

/// Round-trip encoding of a node id as (depth, index within its level).
std::pair<int, std::size_t> encode_node(const std::string& id);
std::string decode_node(int depth, std::size_t index);

}  // namespace icc::pathtree
