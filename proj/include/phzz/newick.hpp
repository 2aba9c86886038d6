#pragma once

// Newick parser for rooted bifurcating trees with branch lengths.

#include <cctype>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace phzz {

struct NewickError : std::runtime_error {
  std::size_t offset;
  NewickError(const std::string& msg, std::size_t off)
      : std::runtime_error(msg + " at byte " + std::to_string(off)),
        offset(off) {}
};

// Node indices: tips first [0, n_tips), then internal nodes, root last.
struct Phylogeny {
  struct Node {
    int parent = -1;
    int left = -1, right = -1;   // -1 for tips
    double branch_length = 0.0;  // child-to-parent; 0 for the root
    std::string label;           // tips only
  };
  std::vector<Node> nodes;
  int n_tips = 0;
  int root = -1;

  bool is_tip(int i) const { return i < n_tips; }
};

namespace detail {

class NewickParser {
 public:
  explicit NewickParser(const std::string& text) : s_(text) {}

  Phylogeny parse() {
    skip_ws();
    RawNode top = parse_clade();
    skip_ws();
    if (pos_ >= s_.size() || s_[pos_] != ';')
      throw NewickError("expected ';'", pos_);
    // Reindex: tips first in encounter order, then internals, root last.
    Phylogeny t;
    t.n_tips = 0;
    for (const auto& n : raw_) t.n_tips += (n.left < 0);
    t.nodes.resize(raw_.size());
    std::vector<int> newid(raw_.size());
    int tip = 0, internal = t.n_tips;
    int top_raw = static_cast<int>(raw_.size()) - 1;
    for (std::size_t i = 0; i < raw_.size(); ++i) {
      if (raw_[i].left < 0)
        newid[i] = tip++;
      else if (static_cast<int>(i) == top_raw)
        newid[i] = static_cast<int>(raw_.size()) - 1;
      else
        newid[i] = internal++;
    }
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < raw_.size(); ++i) {
      if (static_cast<int>(i) != top_raw && !raw_[i].has_length)
        throw NewickError("missing branch length", pos_);
      Phylogeny::Node& n = t.nodes[newid[i]];
      n.branch_length = raw_[i].branch_length;
      n.label = raw_[i].label;
      n.left = raw_[i].left < 0 ? -1 : newid[raw_[i].left];
      n.right = raw_[i].right < 0 ? -1 : newid[raw_[i].right];
      n.parent = raw_[i].parent < 0 ? -1 : newid[raw_[i].parent];
      if (raw_[i].left < 0 && !seen.insert(n.label).second)
        throw NewickError("duplicate tip label '" + n.label + "'", pos_);
    }
    t.root = static_cast<int>(raw_.size()) - 1;
    if (t.n_tips < 2) throw NewickError("tree needs at least 2 tips", pos_);
    return t;
  }

 private:
  struct RawNode {
    int parent = -1, left = -1, right = -1;
    double branch_length = 0.0;
    bool has_length = false;
    std::string label;
  };

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_])))
      ++pos_;
  }

  RawNode parse_clade() {
    skip_ws();
    RawNode node;
    int id;
    if (pos_ < s_.size() && s_[pos_] == '(') {
      ++pos_;
      RawNode lhs = parse_clade();
      int lid = last_id_;
      skip_ws();
      if (pos_ >= s_.size() || s_[pos_] != ',')
        throw NewickError("expected ','", pos_);
      ++pos_;
      RawNode rhs = parse_clade();
      int rid = last_id_;
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ',')
        throw NewickError("polytomy (more than 2 children)", pos_);
      if (pos_ >= s_.size() || s_[pos_] != ')')
        throw NewickError("expected ')'", pos_);
      ++pos_;
      (void)lhs;
      (void)rhs;
      node.left = lid;
      node.right = rid;
      // optional internal label, ignored
      parse_label();
    } else {
      node.label = parse_label();
      if (node.label.empty())
        throw NewickError("expected tip label", pos_);
    }
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ':') {
      ++pos_;
      node.branch_length = parse_number();
      node.has_length = true;
      if (node.branch_length < 0)
        throw NewickError("negative branch length", pos_);
    }
    id = static_cast<int>(raw_.size());
    raw_.push_back(node);
    if (node.left >= 0) {
      raw_[node.left].parent = id;
      raw_[node.right].parent = id;
    }
    last_id_ = id;
    return node;
  }

  std::string parse_label() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < s_.size()) {
      char c = s_[pos_];
      if (c == ':' || c == ',' || c == ')' || c == '(' || c == ';' ||
          std::isspace(static_cast<unsigned char>(c)))
        break;
      ++pos_;
    }
    return s_.substr(start, pos_ - start);
  }

  double parse_number() {
    skip_ws();
    std::size_t start = pos_;
    try {
      std::size_t used = 0;
      double v = std::stod(s_.substr(pos_), &used);
      pos_ += used;
      return v;
    } catch (const std::exception&) {
      throw NewickError("expected branch length", start);
    }
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int last_id_ = -1;
  std::vector<RawNode> raw_;
};

}  // namespace detail

// Parses a rooted bifurcating Newick string. Branch lengths are required
// on all non-root edges; polytomies and duplicate tip labels are errors.
inline Phylogeny parse_newick(const std::string& text) {
  detail::NewickParser p(text);
  return p.parse();
}

}  // namespace phzz
