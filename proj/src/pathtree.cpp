#include "icc/pathtree.hpp"

#include <stdexcept>

namespace icc::pathtree {

bool LoadPathTree::valid_node(const std::string& id) const {
  if (static_cast<int>(id.size()) > depth) return false;
  for (char c : id)
    if (c != 'A' && c != 'B') return false;
  return true;
}

std::size_t LoadPathTree::node_count() const {
  return (std::size_t{1} << (depth + 1)) - 1;
}

std::pair<std::string, std::string> children(const LoadPathTree& tree,
                                             const std::string& prefix) {
  if (!tree.valid_node(prefix)) throw std::invalid_argument("invalid node id: " + prefix);
  if (static_cast<int>(prefix.size()) >= tree.depth)
    throw std::invalid_argument("leaf node has no children: " + prefix);
  return {prefix + 'A', prefix + 'B'};
}

std::vector<std::string> enumerate_paths(int depth, char first) {
  if (depth < 1) throw std::invalid_argument("tree depth must be at least 1");
  std::vector<std::string> out;
  const std::size_t count = std::size_t{1} << (depth - 1);
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::string id(1, first);
    for (int b = depth - 2; b >= 0; --b) id += ((i >> b) & 1) ? 'B' : 'A';
    out.push_back(id);
  }
  return out;
}

std::vector<std::string> subtree_nodes(int depth, char first) {
  std::vector<std::string> out;
  for (int d = 1; d <= depth; ++d)
    for (const auto& p : enumerate_paths(d, first)) out.push_back(p);
  return out;
}

std::pair<int, std::size_t> encode_node(const std::string& id) {
  std::size_t index = 0;
  for (char c : id) {
    if (c != 'A' && c != 'B') throw std::invalid_argument("invalid node id: " + id);
    index = (index << 1) | (c == 'B' ? 1 : 0);
  }
  return {static_cast<int>(id.size()), index};
}

std::string decode_node(int depth, std::size_t index) {
  std::string id(depth, 'A');
  for (int i = depth - 1; i >= 0; --i) {
    if ((index >> (depth - 1 - i)) & 1) id[i] = 'B';
  }
  return id;
}

}  // namespace icc::pathtree
