#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "progsim/lts.hpp"

namespace progsim {

// Text model format:
//
//   # comment
//   program: assign.1(0) assign.1(1)
//   calls: call.1(1)
//   returns: ret.1(0) ret.1(1)
//   internal: LL.1 SC_ok.1
//   idle: idle
//   states: 4
//   initial: 0
//   label 0 "t1=pre"
//   0 -- call.1(1) -> 1
//
// Header lines may repeat; their tokens accumulate. Every action used in a
// transition must be declared in exactly one part of the alphabet.

namespace detail {

inline const std::map<std::string, ActionKind>& header_kinds() {
  static const std::map<std::string, ActionKind> kinds{{"program", ActionKind::Program},
                                                       {"calls", ActionKind::Call},
                                                       {"returns", ActionKind::Return},
                                                       {"internal", ActionKind::Internal},
                                                       {"idle", ActionKind::Idle}};
  return kinds;
}

struct LineCursor {
  std::string_view text;
  std::size_t line;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\r')) ++pos;
  }
  bool at_end() {
    skip_ws();
    return pos >= text.size();
  }
  std::size_t column() const { return pos + 1; }
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line, column(), msg); }

  std::string_view word() {
    skip_ws();
    std::size_t start = pos;
    while (pos < text.size() && text[pos] != ' ' && text[pos] != '\t' && text[pos] != '\r') ++pos;
    return text.substr(start, pos - start);
  }

  std::size_t number() {
    skip_ws();
    std::size_t start = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    if (start == pos) fail("expected a state index");
    return std::stoul(std::string(text.substr(start, pos - start)));
  }

  void expect(std::string_view lit) {
    skip_ws();
    if (text.substr(pos, lit.size()) != lit) fail("expected '" + std::string(lit) + "'");
    pos += lit.size();
  }

  std::string quoted() {
    skip_ws();
    if (pos >= text.size() || text[pos] != '"') fail("expected a quoted label");
    ++pos;
    std::string out;
    while (pos < text.size() && text[pos] != '"') {
      if (text[pos] == '\\' && pos + 1 < text.size()) ++pos;
      out += text[pos++];
    }
    if (pos >= text.size()) fail("unterminated label");
    ++pos;
    return out;
  }
};

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

/// Parses the text model format into an unvalidated builder so that callers
/// can inspect raw rows (e.g. for determinism witnesses) before building.
inline LtsBuilder parse_lts_text(std::string_view text) {
  LtsBuilder b;
  std::map<std::string, Action> declared;
  std::optional<std::size_t> num_states;
  std::optional<StateId> initial;
  struct PendingLabel {
    std::size_t line;
    StateId state;
    std::string text;
  };
  std::vector<PendingLabel> labels;
  struct PendingRow {
    std::size_t line, column;
    StateId from;
    std::string token;
    StateId to;
  };
  std::vector<PendingRow> rows;

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    detail::LineCursor cur{line, line_no};
    if (cur.at_end() || line[cur.pos] == '#') {
      if (end == text.size()) break;
      continue;
    }
    std::size_t colon = line.find(':');
    std::string_view head = line.substr(cur.pos, colon == std::string_view::npos ? 0 : colon - cur.pos);
    auto hk = detail::header_kinds().find(std::string(head));
    if (colon != std::string_view::npos && hk != detail::header_kinds().end()) {
      cur.pos = colon + 1;
      while (!cur.at_end()) {
        std::size_t col = cur.column();
        std::string_view w = cur.word();
        auto [tok, bad] = parse_action_token(w);
        if (!tok) throw ParseError(line_no, col + bad, "malformed action '" + std::string(w) + "'");
        Action a = tok->with_kind(hk->second);
        auto [it, inserted] = declared.emplace(a.token(), a);
        if (!inserted && it->second.kind != a.kind)
          throw ParseError(line_no, col,
                           "action '" + a.token() + "' already declared as " + std::string(to_string(it->second.kind)) +
                               "; alphabet parts must be disjoint");
        b.declare(a);
      }
    } else if (head == "states" && colon != std::string_view::npos) {
      cur.pos = colon + 1;
      num_states = cur.number();
      if (!cur.at_end()) cur.fail("trailing characters");
    } else if (head == "initial" && colon != std::string_view::npos) {
      cur.pos = colon + 1;
      initial = static_cast<StateId>(cur.number());
      if (!cur.at_end()) cur.fail("trailing characters");
    } else if (line.substr(cur.pos, 6) == "label ") {
      cur.pos += 6;
      auto s = static_cast<StateId>(cur.number());
      std::string l = cur.quoted();
      if (!cur.at_end()) cur.fail("trailing characters");
      labels.push_back({line_no, s, std::move(l)});
    } else if (std::isdigit(static_cast<unsigned char>(line[cur.pos]))) {
      auto from = static_cast<StateId>(cur.number());
      cur.expect("--");
      cur.skip_ws();
      std::size_t col = cur.column();
      std::string tok(cur.word());
      cur.expect("->");
      auto to = static_cast<StateId>(cur.number());
      if (!cur.at_end()) cur.fail("trailing characters");
      rows.push_back({line_no, col, from, std::move(tok), to});
    } else {
      cur.fail("unrecognised line");
    }
    if (end == text.size()) break;
  }

  if (!num_states) throw ParseError(line_no, 1, "missing 'states:' header");
  if (*num_states == 0) throw ParseError(line_no, 1, "an LTS needs at least one state");
  b.set_num_states(*num_states);
  b.set_initial(initial.value_or(0));
  if (initial && *initial >= *num_states) throw ParseError(line_no, 1, "initial state out of range");
  for (auto& l : labels) {
    if (l.state >= *num_states) throw ParseError(l.line, 1, "label for missing state " + std::to_string(l.state));
    b.set_label(l.state, std::move(l.text));
  }
  for (const auto& r : rows) {
    auto it = declared.find(r.token);
    if (it == declared.end()) throw ParseError(r.line, r.column, "undeclared action '" + r.token + "'");
    if (r.from >= *num_states || r.to >= *num_states)
      throw ParseError(r.line, 1, "state index out of range (" + std::to_string(*num_states) + " states)");
    b.add_transition(r.from, it->second, r.to);
  }
  return b;
}

/// Canonical text form; parse then write reproduces it byte for byte.
inline std::string write_lts_text(const Lts& lts) {
  std::ostringstream os;
  const auto& p = lts.partition();
  auto part = [&](const char* head, const ActionSet& s) {
    os << head << ":";
    for (const auto& a : s) os << ' ' << a.token();
    os << '\n';
  };
  part("program", p.program());
  part("calls", p.calls());
  part("returns", p.returns());
  part("internal", p.internal());
  os << "idle: " << p.idle().token() << '\n';
  os << "states: " << lts.num_states() << '\n';
  os << "initial: " << lts.initial() << '\n';
  for (StateId s = 0; s < lts.num_states(); ++s)
    if (!lts.label(s).empty()) os << "label " << s << ' ' << detail::quote(lts.label(s)) << '\n';
  for (StateId s = 0; s < lts.num_states(); ++s)
    for (const auto& e : lts.edges(s)) os << s << " -- " << lts.action(e.action).token() << " -> " << e.target << '\n';
  return os.str();
}

inline nlohmann::json lts_to_json(const Lts& lts) {
  using nlohmann::json;
  auto tokens = [](const ActionSet& s) {
    json arr = json::array();
    for (const auto& a : s) arr.push_back(a.token());
    return arr;
  };
  const auto& p = lts.partition();
  json j;
  j["schema_version"] = 1;
  j["alphabet"] = {{"program", tokens(p.program())},
                   {"calls", tokens(p.calls())},
                   {"returns", tokens(p.returns())},
                   {"internal", tokens(p.internal())},
                   {"idle", p.idle().token()}};
  j["states"] = lts.num_states();
  j["initial"] = lts.initial();
  json labels = json::array();
  for (StateId s = 0; s < lts.num_states(); ++s) labels.push_back(lts.label(s));
  j["labels"] = labels;
  json rows = json::array();
  for (StateId s = 0; s < lts.num_states(); ++s)
    for (const auto& e : lts.edges(s)) rows.push_back(json::array({s, lts.action(e.action).token(), e.target}));
  j["transitions"] = rows;
  return j;
}

inline LtsBuilder lts_builder_from_json(const nlohmann::json& j) {
  LtsBuilder b;
  std::map<std::string, Action> declared;
  auto add = [&](const std::string& tokstr, ActionKind k) {
    auto [tok, bad] = parse_action_token(tokstr);
    if (!tok) throw ParseError(1, 1, "malformed action '" + tokstr + "'");
    Action a = tok->with_kind(k);
    auto [it, inserted] = declared.emplace(a.token(), a);
    if (!inserted && it->second.kind != k)
      throw ParseError(1, 1, "action '" + a.token() + "' already declared as " + std::string(to_string(it->second.kind)) +
                                 "; alphabet parts must be disjoint");
    b.declare(a);
  };
  try {
    const auto& alpha = j.at("alphabet");
    for (const auto& [key, kind] : detail::header_kinds()) {
      if (kind == ActionKind::Idle) continue;
      for (const auto& t : alpha.at(key)) add(t.get<std::string>(), kind);
    }
    add(alpha.at("idle").get<std::string>(), ActionKind::Idle);
    std::size_t n = j.at("states").get<std::size_t>();
    if (n == 0) throw ParseError(1, 1, "an LTS needs at least one state");
    b.set_num_states(n);
    b.set_initial(j.value("initial", 0u));
    if (j.contains("labels")) {
      const auto& labels = j.at("labels");
      for (std::size_t s = 0; s < labels.size() && s < n; ++s) b.set_label(static_cast<StateId>(s), labels[s]);
    }
    for (const auto& row : j.at("transitions")) {
      auto tok = row.at(1).get<std::string>();
      auto it = declared.find(tok);
      if (it == declared.end()) throw ParseError(1, 1, "undeclared action '" + tok + "'");
      b.add_transition(row.at(0).get<StateId>(), it->second, row.at(2).get<StateId>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, 1, std::string("malformed JSON model: ") + e.what());
  }
  return b;
}

/// Reads either format; JSON is recognised by a leading '{'.
inline LtsBuilder parse_lts(std::string_view text) {
  auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(1, e.byte, std::string("malformed JSON: ") + e.what());
    }
    return lts_builder_from_json(j);
  }
  return parse_lts_text(text);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << content;
}

inline Lts load_lts(const std::string& path) { return parse_lts(read_file(path)).build(); }

inline std::string write_dot(const Lts& lts, const std::string& name = "lts") {
  std::ostringstream os;
  os << "digraph " << detail::quote(name) << " {\n  rankdir=LR;\n  node [shape=circle];\n";
  os << "  __init [shape=point];\n  __init -> s" << lts.initial() << ";\n";
  for (StateId s = 0; s < lts.num_states(); ++s) {
    std::string label = std::to_string(s);
    if (!lts.label(s).empty()) {
      label += "\\n";
      for (char c : lts.label(s)) label += (c == '"' ? std::string("\\\"") : std::string(1, c));
    }
    os << "  s" << s << " [label=\"" << label << "\"];\n";
  }
  for (StateId s = 0; s < lts.num_states(); ++s)
    for (const auto& e : lts.edges(s)) {
      os << "  s" << s << " -> s" << e.target << " [label=" << detail::quote(lts.action(e.action).token());
      if (e.action == lts.idle_id()) os << ", style=dashed";
      os << "];\n";
    }
  os << "}\n";
  return os.str();
}

}  // namespace progsim
