#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace d2cc {

/// An input dependency tree: tokens with POS, head index (0 = root) and label.
/// Token i is stored at position i-1.
struct DepTree {
  std::vector<std::string> words;
  std::vector<std::string> pos;
  std::vector<int> heads;
  std::vector<std::string> labels;

  int size() const { return static_cast<int>(words.size()); }
  /// Tokens whose head is `i` (1-based), in ascending order.
  std::vector<int> children(int i) const;
  /// Throws DataError if there is not exactly one root, a head is out of
  /// range, or the head graph has a cycle.
  void check() const;
};

/// Reads the ID, FORM, UPOS, HEAD and DEPREL columns. Multiword and empty
/// node lines are skipped; '#' comment lines are ignored.
std::vector<DepTree> read_conllu(std::string_view text);
std::string write_conllu(const std::vector<DepTree>& trees);

}  // namespace d2cc
