// Canonical s-expression codec for logical forms.
//
//   form  := (count PRED INT)
//          | (comparative COL STR STR more|less)
//          | (superlative COL highest|lowest STR)
//          | (unique PRED STR)
//          | (ordinal COL INT highest|lowest INT)
//          | (aggregation COL average|total DEC)
//          | (majority PRED majority|all)
//   PRED  := (pred COL =|>|< INT)
//
// Columns are bare atoms. Entities are double-quoted strings in which a
// backslash escapes the next character. DEC has at most two fraction digits.

#include <charconv>

#include "typectl/common.hpp"
#include "typectl/logic.hpp"

namespace typectl {

namespace {

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

std::string op_symbol(CmpOp op) {
  switch (op) {
    case CmpOp::kEq: return "=";
    case CmpOp::kGt: return ">";
    case CmpOp::kLt: return "<";
  }
  return "?";
}

std::string pred_sexpr(const Predicate& p) {
  return "(pred " + p.column + " " + op_symbol(p.op) + " " + std::to_string(p.value) + ")";
}

std::string dir_atom(Extremum e) { return e == Extremum::kHighest ? "highest" : "lowest"; }

struct Node {
  bool is_list = false;
  bool quoted = false;
  std::string atom;
  std::vector<Node> items;
};

class Reader {
 public:
  explicit Reader(std::string_view s) : s_(s) {}

  Node read() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    if (s_[pos_] == '(') {
      ++pos_;
      Node n;
      n.is_list = true;
      for (;;) {
        skip();
        if (pos_ >= s_.size()) fail("unterminated list");
        if (s_[pos_] == ')') {
          ++pos_;
          return n;
        }
        n.items.push_back(read());
      }
    }
    if (s_[pos_] == ')') fail("unexpected ')'");
    if (s_[pos_] == '"') {
      ++pos_;
      Node n;
      n.quoted = true;
      for (;;) {
        if (pos_ >= s_.size()) fail("unterminated string");
        char c = s_[pos_++];
        if (c == '"') return n;
        if (c == '\\') {
          if (pos_ >= s_.size()) fail("dangling escape");
          c = s_[pos_++];
        }
        n.atom += c;
      }
    }
    Node n;
    while (pos_ < s_.size() && s_[pos_] != '(' && s_[pos_] != ')' && s_[pos_] != '"' &&
           s_[pos_] != ' ' && s_[pos_] != '\t' && s_[pos_] != '\n')
      n.atom += s_[pos_++];
    return n;
  }

  void expect_end() {
    skip();
    if (pos_ != s_.size()) fail("trailing characters");
  }

  [[noreturn]] static void fail(const std::string& what) {
    throw ValidityError("s-expression: " + what);
  }

 private:
  void skip() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n')) ++pos_;
  }
  std::string_view s_;
  std::size_t pos_ = 0;
};

const std::string& atom(const Node& n) {
  if (n.is_list || n.quoted) Reader::fail("expected atom");
  return n.atom;
}
const std::string& str(const Node& n) {
  if (!n.quoted) Reader::fail("expected quoted string");
  return n.atom;
}
int integer(const Node& n) {
  const std::string& a = atom(n);
  int v = 0;
  auto [p, ec] = std::from_chars(a.data(), a.data() + a.size(), v);
  if (ec != std::errc() || p != a.data() + a.size()) Reader::fail("expected integer, got " + a);
  return v;
}
void arity(const Node& n, std::size_t k) {
  if (!n.is_list || n.items.size() != k) Reader::fail("wrong arity");
}
Extremum dir(const Node& n) {
  const auto& a = atom(n);
  if (a == "highest") return Extremum::kHighest;
  if (a == "lowest") return Extremum::kLowest;
  Reader::fail("expected highest|lowest");
}
Predicate pred(const Node& n) {
  arity(n, 4);
  if (atom(n.items[0]) != "pred") Reader::fail("expected (pred ...)");
  const auto& op = atom(n.items[2]);
  CmpOp o;
  if (op == "=") o = CmpOp::kEq;
  else if (op == ">") o = CmpOp::kGt;
  else if (op == "<") o = CmpOp::kLt;
  else Reader::fail("bad operator " + op);
  return {atom(n.items[1]), o, integer(n.items[3])};
}

}  // namespace

std::string to_sexpr(const LogicalForm& form) {
  return std::visit(
      [](const auto& f) -> std::string {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, CountForm>) {
          return "(count " + pred_sexpr(f.pred) + " " + std::to_string(f.asserted_n) + ")";
        } else if constexpr (std::is_same_v<T, ComparativeForm>) {
          return "(comparative " + f.column + " " + quote(f.entity_a) + " " + quote(f.entity_b) +
                 (f.relation == Relation::kMore ? " more)" : " less)");
        } else if constexpr (std::is_same_v<T, SuperlativeForm>) {
          return "(superlative " + f.column + " " + dir_atom(f.extremum) + " " + quote(f.entity) +
                 ")";
        } else if constexpr (std::is_same_v<T, UniqueForm>) {
          return "(unique " + pred_sexpr(f.pred) + " " + quote(f.entity) + ")";
        } else if constexpr (std::is_same_v<T, OrdinalForm>) {
          return "(ordinal " + f.column + " " + std::to_string(f.rank) + " " +
                 dir_atom(f.direction) + " " + std::to_string(f.asserted_value) + ")";
        } else if constexpr (std::is_same_v<T, AggregationForm>) {
          return "(aggregation " + f.column + (f.agg == AggKind::kAverage ? " average " : " total ") +
                 format_centi(f.asserted_centi) + ")";
        } else {
          return "(majority " + pred_sexpr(f.pred) +
                 (f.scope == Scope::kMajority ? " majority)" : " all)");
        }
      },
      form);
}

LogicalForm from_sexpr(std::string_view text) {
  Reader r(text);
  const Node n = r.read();
  r.expect_end();
  if (!n.is_list || n.items.empty()) Reader::fail("expected a list");
  const std::string& head = atom(n.items[0]);
  const auto& it = n.items;
  if (head == "count") {
    arity(n, 3);
    return CountForm{pred(it[1]), integer(it[2])};
  }
  if (head == "comparative") {
    arity(n, 5);
    const auto& rel = atom(it[4]);
    if (rel != "more" && rel != "less") Reader::fail("expected more|less");
    return ComparativeForm{atom(it[1]), str(it[2]), str(it[3]),
                           rel == "more" ? Relation::kMore : Relation::kLess};
  }
  if (head == "superlative") {
    arity(n, 4);
    return SuperlativeForm{atom(it[1]), dir(it[2]), str(it[3])};
  }
  if (head == "unique") {
    arity(n, 3);
    return UniqueForm{pred(it[1]), str(it[2])};
  }
  if (head == "ordinal") {
    arity(n, 5);
    return OrdinalForm{atom(it[1]), integer(it[2]), dir(it[3]), integer(it[4])};
  }
  if (head == "aggregation") {
    arity(n, 4);
    const auto& agg = atom(it[2]);
    if (agg != "average" && agg != "total") Reader::fail("expected average|total");
    auto c = parse_centi(atom(it[3]));
    if (!c) Reader::fail("bad decimal " + atom(it[3]));
    return AggregationForm{atom(it[1]), agg == "average" ? AggKind::kAverage : AggKind::kTotal,
                           *c};
  }
  if (head == "majority") {
    arity(n, 3);
    const auto& scope = atom(it[2]);
    if (scope != "majority" && scope != "all") Reader::fail("expected majority|all");
    return MajorityForm{pred(it[1]), scope == "all" ? Scope::kAll : Scope::kMajority};
  }
  Reader::fail("unknown head " + head);
}

}  // namespace typectl
