#include "blockdyn/types.hpp"

#include <algorithm>
#include <string>
#include <unordered_map>

#include "blockdyn/errors.hpp"

namespace blockdyn {

Membership::Membership(std::vector<int> labels_in, int k)
    : labels(std::move(labels_in)), num_communities(k) {
  if (num_communities < 1) {
    throw Error(errc::invalid_argument, "membership needs at least one community");
  }
  if (labels.empty()) {
    throw Error(errc::invalid_argument, "membership needs at least one node");
  }
  if (num_communities > static_cast<int>(labels.size())) {
    throw Error(errc::invalid_argument, "more communities than nodes");
  }
  for (const int l : labels) {
    if (l < 1 || l > num_communities) {
      throw Error(errc::invalid_argument,
                  "label " + std::to_string(l) + " outside 1.." + std::to_string(num_communities));
    }
  }
}

Membership Membership::from_labels(std::vector<int> labels_in) {
  if (labels_in.empty()) {
    throw Error(errc::invalid_argument, "membership needs at least one node");
  }
  const int k = *std::max_element(labels_in.begin(), labels_in.end());
  return Membership(std::move(labels_in), k);
}

std::vector<int> Membership::community_sizes() const {
  std::vector<int> sizes(static_cast<std::size_t>(num_communities), 0);
  for (const int l : labels) ++sizes[static_cast<std::size_t>(l - 1)];
  return sizes;
}

Membership canonicalize_labels(const std::vector<int>& raw) {
  if (raw.empty()) {
    throw Error(errc::invalid_argument, "cannot canonicalize an empty label vector");
  }
  std::unordered_map<int, int> remap;
  remap.reserve(raw.size());
  std::vector<int> out(raw.size());
  int next = 1;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto [it, inserted] = remap.emplace(raw[i], next);
    if (inserted) ++next;
    out[i] = it->second;
  }
  return Membership(std::move(out), next - 1);
}

}  // namespace blockdyn
