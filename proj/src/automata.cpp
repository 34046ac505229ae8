#include "hopnav/automata.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

#include "hopnav/error.hpp"

namespace hopnav {

int Dra::next(int state, Observation obs) const {
  const auto it = transitions.find({state, obs});
  return it == transitions.end() ? -1 : it->second;
}

int Dra::symbol(const std::string& name) const {
  const auto it = std::find(alphabet.begin(), alphabet.end(), name);
  return it == alphabet.end() ? -1 : static_cast<int>(it - alphabet.begin());
}

namespace {

struct Token {
  std::string_view text;
  int column;
};

[[noreturn]] void fail(int line, int column, const std::string& msg) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg);
}

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size() || line[i] == '#') break;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r' && line[i] != '#') ++i;
    out.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
  }
  return out;
}

int parse_int(const Token& t, int line) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
  if (ec != std::errc() || ptr != t.text.data() + t.text.size()) {
    fail(line, t.column, "expected an integer, got '" + std::string(t.text) + "'");
  }
  return v;
}

std::vector<int> parse_set(std::string_view body, int line, int column) {
  if (body.size() < 2 || body.front() != '{' || body.back() != '}') fail(line, column, "expected {...}");
  body = body.substr(1, body.size() - 2);
  std::vector<int> out;
  int col = column + 1;
  while (!body.empty()) {
    const std::size_t comma = body.find(',');
    const std::string_view item = body.substr(0, comma);
    out.push_back(parse_int({item, col}, line));
    if (comma == std::string_view::npos) break;
    body.remove_prefix(comma + 1);
    col += static_cast<int>(comma) + 1;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string format_set(const std::vector<int>& s) {
  std::string out = "{";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "}";
}

}  // namespace

Dra parse_dra(std::string_view text) {
  Dra dra;
  bool have_states = false, have_init = false, have_alphabet = false;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::vector<Token> tok = tokenize(line);
    if (tok.empty()) continue;
    const std::string_view kw = tok[0].text;
    const auto expect = [&](std::size_t n) {
      if (tok.size() != n) {
        fail(line_no, tok.back().column, "'" + std::string(kw) + "' takes " + std::to_string(n - 1) + " argument(s)");
      }
    };
    const auto check_state = [&](int s, const Token& t) {
      if (!have_states) fail(line_no, t.column, "'states' must be declared first");
      if (s < 0 || s >= dra.state_count) {
        throw Error(ErrorCode::UnknownStateReference, "line " + std::to_string(line_no) + ", column " +
                                                          std::to_string(t.column) + ": state " + std::to_string(s) +
                                                          " is not declared");
      }
    };

    if (kw == "states") {
      expect(2);
      if (have_states) fail(line_no, tok[0].column, "duplicate 'states'");
      dra.state_count = parse_int(tok[1], line_no);
      if (dra.state_count < 1) fail(line_no, tok[1].column, "state count must be positive");
      have_states = true;
    } else if (kw == "init") {
      expect(2);
      if (have_init) fail(line_no, tok[0].column, "duplicate 'init'");
      dra.initial = parse_int(tok[1], line_no);
      check_state(dra.initial, tok[1]);
      have_init = true;
    } else if (kw == "alphabet") {
      if (have_alphabet) fail(line_no, tok[0].column, "duplicate 'alphabet'");
      for (std::size_t i = 1; i < tok.size(); ++i) {
        const std::string sym(tok[i].text);
        if (sym == "-" || sym.find(',') != std::string::npos) fail(line_no, tok[i].column, "invalid symbol '" + sym + "'");
        if (dra.symbol(sym) >= 0) fail(line_no, tok[i].column, "duplicate symbol '" + sym + "'");
        if (dra.alphabet.size() >= 32) fail(line_no, tok[i].column, "at most 32 symbols are supported");
        dra.alphabet.push_back(sym);
      }
      have_alphabet = true;
    } else if (kw == "trans") {
      expect(4);
      if (!have_alphabet) fail(line_no, tok[0].column, "'alphabet' must precede transitions");
      const int s = parse_int(tok[1], line_no);
      check_state(s, tok[1]);
      Observation obs = 0;
      if (tok[2].text != "-") {
        std::string_view rest = tok[2].text;
        int col = tok[2].column;
        while (true) {
          const std::size_t comma = rest.find(',');
          const std::string sym(rest.substr(0, comma));
          const int idx = dra.symbol(sym);
          if (idx < 0) fail(line_no, col, "unknown symbol '" + sym + "'");
          obs |= Observation{1} << idx;
          if (comma == std::string_view::npos) break;
          rest.remove_prefix(comma + 1);
          col += static_cast<int>(comma) + 1;
        }
      }
      const int t = parse_int(tok[3], line_no);
      check_state(t, tok[3]);
      if (!dra.transitions.emplace(std::pair{s, obs}, t).second) {
        throw Error(ErrorCode::NondeterministicTransition, "line " + std::to_string(line_no) +
                                                               ": second transition for state " + std::to_string(s) +
                                                               " on '" + std::string(tok[2].text) + "'");
      }
    } else if (kw == "pair") {
      expect(3);
      if (tok[1].text.substr(0, 2) != "G:") fail(line_no, tok[1].column, "expected G:{...}");
      if (tok[2].text.substr(0, 2) != "B:") fail(line_no, tok[2].column, "expected B:{...}");
      RabinPair pair{parse_set(tok[1].text.substr(2), line_no, tok[1].column + 2),
                     parse_set(tok[2].text.substr(2), line_no, tok[2].column + 2)};
      for (int s : pair.good) check_state(s, tok[1]);
      for (int s : pair.bad) check_state(s, tok[2]);
      dra.pairs.push_back(std::move(pair));
    } else {
      fail(line_no, tok[0].column, "unknown directive '" + std::string(kw) + "'");
    }
  }
  if (!have_states) fail(line_no, 1, "missing 'states'");
  if (!have_init) fail(line_no, 1, "missing 'init'");
  if (!have_alphabet) fail(line_no, 1, "missing 'alphabet'");
  return dra;
}

std::string print_dra(const Dra& dra) {
  std::ostringstream out;
  out << "states " << dra.state_count << "\n";
  out << "init " << dra.initial << "\n";
  out << "alphabet";
  for (const std::string& s : dra.alphabet) out << ' ' << s;
  out << "\n";
  for (const auto& [key, target] : dra.transitions) {
    std::string obs;
    for (std::size_t i = 0; i < dra.alphabet.size(); ++i) {
      if ((key.second >> i) & 1u) obs += (obs.empty() ? "" : ",") + dra.alphabet[i];
    }
    out << "trans " << key.first << ' ' << (obs.empty() ? "-" : obs) << ' ' << target << "\n";
  }
  for (const RabinPair& p : dra.pairs) out << "pair G:" << format_set(p.good) << " B:" << format_set(p.bad) << "\n";
  return out.str();
}

Dra build_until_dra(const std::string& goal, const std::string& hazard) {
  if (goal == hazard) throw Error(ErrorCode::InvalidArgument, "goal and hazard symbols must differ");
  Dra dra;
  dra.state_count = 3;
  dra.initial = 0;
  dra.alphabet = {goal, hazard};
  for (Observation obs = 0; obs < 4; ++obs) {
    const bool g = obs & 1u, h = obs & 2u;
    dra.transitions[{0, obs}] = h ? 2 : (g ? 1 : 0);
    dra.transitions[{1, obs}] = 1;
    dra.transitions[{2, obs}] = 2;
  }
  dra.pairs.push_back({{1}, {2}});
  return dra;
}

Observation project_label(Observation label, const std::vector<std::string>& from, const Dra& dra) {
  Observation obs = 0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (!((label >> i) & 1u)) continue;
    const int idx = dra.symbol(from[i]);
    if (idx < 0) {
      throw Error(ErrorCode::AlphabetMismatch, "proposition '" + from[i] + "' is not in the automaton alphabet");
    }
    obs |= Observation{1} << idx;
  }
  return obs;
}

MtPimdp product(const Imdp& imdp, const Dra& dra, std::vector<double> reward) {
  const int nq = imdp.mdp.size();
  if (static_cast<int>(reward.size()) != nq) {
    throw Error(ErrorCode::InvalidArgument, "reward vector must have one entry per abstraction state");
  }
  MtPimdp pm;
  pm.cell_count = nq;
  pm.dra_states = dra.state_count;
  pm.pairs = dra.pairs;
  pm.reward = std::move(reward);
  pm.mdp.choices.resize(static_cast<std::size_t>(nq * dra.state_count));

  const std::vector<std::string>& props = imdp.partition.propositions();
  std::vector<Observation> obs(static_cast<std::size_t>(nq));
  for (int q = 0; q < nq; ++q) obs[q] = project_label(imdp.labels[q], props, dra);

  for (int q = 0; q < nq; ++q) {
    for (int s = 0; s < dra.state_count; ++s) {
      const int s_next = dra.next(s, obs[q]);
      if (s_next < 0) continue;
      auto& row = pm.mdp.choices[pm.state(q, s)];
      for (const Choice& c : imdp.mdp.choices[q]) {
        Choice pc;
        pc.action = c.action;
        pc.edges.reserve(c.edges.size());
        for (const IntervalEdge& e : c.edges) pc.edges.push_back({pm.state(e.target, s_next), e.lower, e.upper});
        row.push_back(std::move(pc));
      }
    }
  }
  for (int q0 : imdp.initial) {
    const int s0 = dra.next(dra.initial, obs[q0]);
    if (s0 < 0) throw Error(ErrorCode::AlphabetMismatch, "automaton has no move on the initial label");
    pm.initial.push_back(pm.state(q0, s0));
  }
  return pm;
}

}  // namespace hopnav
