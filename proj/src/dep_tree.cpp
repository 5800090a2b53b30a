#include "d2cc/dep_tree.hpp"

#include <charconv>
#include <sstream>

#include "d2cc/errors.hpp"

namespace d2cc {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    cols.push_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return cols;
}

int to_int(std::string_view s, int sentence, std::string_view what) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("sentence " + std::to_string(sentence) + ": bad " + std::string(what) + " '" +
                    std::string(s) + "'");
  }
  return value;
}

}  // namespace

std::vector<int> DepTree::children(int i) const {
  std::vector<int> out;
  for (int j = 1; j <= size(); ++j) {
    if (heads[j - 1] == i) out.push_back(j);
  }
  return out;
}

void DepTree::check() const {
  const int n = size();
  if (n == 0) throw DataError("empty dependency tree");
  int roots = 0;
  for (int h : heads) {
    if (h < 0 || h > n) throw DataError("head index " + std::to_string(h) + " out of range");
    if (h == 0) ++roots;
  }
  for (int i = 1; i <= n; ++i) {
    int cur = i;
    for (int steps = 0; cur != 0; ++steps) {
      if (steps > n) throw DataError("cycle in head graph through token " + std::to_string(i));
      cur = heads[cur - 1];
    }
  }
  if (roots != 1) throw DataError("expected exactly one root, found " + std::to_string(roots));
}

std::vector<DepTree> read_conllu(std::string_view text) {
  std::vector<DepTree> trees;
  DepTree current;
  auto flush = [&] {
    if (current.words.empty()) return;
    const int ordinal = static_cast<int>(trees.size()) + 1;
    try {
      current.check();
    } catch (const DataError& e) {
      throw DataError("sentence " + std::to_string(ordinal) + ": " + e.what());
    }
    trees.push_back(std::move(current));
    current = DepTree{};
  };

  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      flush();
      continue;
    }
    if (line.front() == '#') continue;
    auto cols = split_tabs(line);
    const int ordinal = static_cast<int>(trees.size()) + 1;
    if (cols.size() < 8) {
      throw DataError("sentence " + std::to_string(ordinal) + ": expected at least 8 columns");
    }
    if (cols[0].find_first_of("-.") != std::string_view::npos) continue;
    int id = to_int(cols[0], ordinal, "ID");
    if (id != current.size() + 1) {
      throw DataError("sentence " + std::to_string(ordinal) + ": non-sequential ID " + std::to_string(id));
    }
    current.words.emplace_back(cols[1]);
    current.pos.emplace_back(cols[3]);
    current.heads.push_back(to_int(cols[6], ordinal, "HEAD"));
    current.labels.emplace_back(cols[7]);
  }
  flush();
  return trees;
}

std::string write_conllu(const std::vector<DepTree>& trees) {
  std::ostringstream out;
  for (const auto& t : trees) {
    for (int i = 0; i < t.size(); ++i) {
      out << i + 1 << '\t' << t.words[i] << "\t_\t" << t.pos[i] << "\t_\t_\t" << t.heads[i] << '\t'
          << t.labels[i] << "\t_\t_\n";
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace d2cc
