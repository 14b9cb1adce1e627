#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "grammar_data.hpp"

namespace privaug {

Symbol Symbol::nonterminal(std::string name) { return {Kind::kNonterminal, std::move(name), std::nullopt}; }
Symbol Symbol::terminal(std::string token) { return {Kind::kTerminal, std::move(token), std::nullopt}; }
Symbol Symbol::slot(std::string category) {
  Symbol s{Kind::kSlot, category, category};
  return s;
}

namespace {

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  });
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Splits a logical template into literals and {k} holes.
std::vector<TemplatePiece> split_template(const std::string& tmpl) {
  std::vector<TemplatePiece> pieces;
  std::string lit;
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i);
      if (close != std::string::npos && close > i + 1) {
        auto digits = tmpl.substr(i + 1, close - i - 1);
        if (std::all_of(digits.begin(), digits.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
          if (!lit.empty()) pieces.push_back({std::move(lit), std::nullopt});
          lit.clear();
          pieces.push_back({{}, static_cast<std::size_t>(std::stoul(digits))});
          i = close + 1;
          continue;
        }
      }
    }
    lit.push_back(tmpl[i++]);
  }
  if (!lit.empty()) pieces.push_back({std::move(lit), std::nullopt});
  return pieces;
}

// Strips a comment: '#' starting a whitespace-delimited token and followed by
// whitespace or end of line. Tokens such as "#1" are kept.
std::string strip_comment(const std::string& line) {
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] != '#') continue;
    bool at_token_start = i == 0 || std::isspace(static_cast<unsigned char>(line[i - 1]));
    bool standalone = i + 1 == line.size() || std::isspace(static_cast<unsigned char>(line[i + 1]));
    if (at_token_start && (standalone || i == 0)) return line.substr(0, i);
  }
  return line;
}

std::string production_text(const SyncProduction& p) {
  std::string out = p.lhs + " ->";
  for (const auto& s : p.canonical_rhs) {
    out += ' ';
    if (s.is_nonterminal()) out += "<" + s.name + ">";
    else if (s.is_slot()) out += "<slot:" + s.name + ">";
    else out += s.name;
  }
  out += " => " + p.logical_template;
  return out;
}

// Validates symbols and binds template holes; throws GrammarError (line 0).
void prepare_production(SyncProduction& p) {
  using K = GrammarError::Kind;
  if (!is_identifier(p.lhs)) throw GrammarError(K::kInvalid, 0, "invalid nonterminal '" + p.lhs + "'");
  if (p.canonical_rhs.empty())
    throw GrammarError(K::kInvalid, 0, "production for " + p.lhs + " has an empty canonical side");
  std::size_t occurrences = 0;
  for (const auto& s : p.canonical_rhs) {
    if (s.name.empty() || std::any_of(s.name.begin(), s.name.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }))
      throw GrammarError(K::kInvalid, 0, "symbol names must be non-empty without whitespace");
    if (s.slot_category.has_value() != s.is_slot())
      throw GrammarError(K::kInvalid, 0, "slot category must be set exactly on slot symbols");
    if (!s.is_terminal()) ++occurrences;
  }
  p.pieces = split_template(p.logical_template);
  std::vector<int> used(occurrences, 0);
  for (const auto& piece : p.pieces) {
    if (!piece.hole) continue;
    if (*piece.hole >= occurrences)
      throw GrammarError(K::kAlignmentArity, 0,
                         "template hole {" + std::to_string(*piece.hole) + "} has no matching occurrence in " + production_text(p));
    if (used[*piece.hole]++)
      throw GrammarError(K::kAlignmentArity, 0, "template hole used twice in " + production_text(p));
  }
  if (std::find(used.begin(), used.end(), 0) != used.end())
    throw GrammarError(K::kAlignmentArity, 0, "unaligned nonterminal/slot occurrence in " + production_text(p));
  p.alignment.resize(occurrences);
  for (std::size_t k = 0; k < occurrences; ++k) p.alignment[k] = k;
}

}  // namespace

Grammar Grammar::create(std::string start, std::vector<SyncProduction> productions) {
  using K = GrammarError::Kind;
  if (!is_identifier(start)) throw GrammarError(K::kSyntax, 0, "invalid start symbol '" + start + "'");
  auto data = std::make_shared<Data>();
  data->start = start;

  for (std::size_t i = 0; i < productions.size(); ++i) {
    auto& p = productions[i];
    p.index = i;
    prepare_production(p);
    for (const auto& sym : p.canonical_rhs)
      if (sym.is_slot()) data->slot_categories.insert(sym.name);
    data->by_lhs[p.lhs].push_back(i);
  }

  for (const auto& p : productions)
    for (const auto& s : p.canonical_rhs)
      if (s.is_nonterminal() && !data->by_lhs.count(s.name))
        throw GrammarError(K::kUndefinedNonterminal, 0, "undefined nonterminal '" + s.name + "'");
  if (!data->by_lhs.count(start))
    throw GrammarError(K::kUndefinedNonterminal, 0, "start symbol '" + start + "' has no production");

  // Compile dense ids.
  for (const auto& [name, _] : data->by_lhs) {
    data->nt_ids[name] = static_cast<int>(data->nt_names.size());
    data->nt_names.push_back(name);
  }
  for (const auto& cat : data->slot_categories) {
    data->slot_ids[cat] = static_cast<int>(data->slot_names.size());
    data->slot_names.push_back(cat);
  }
  for (const auto& p : productions) {
    Data::Prod cp{data->nt_ids.at(p.lhs), {}};
    for (const auto& s : p.canonical_rhs) {
      int id = 0;
      if (s.is_nonterminal()) {
        id = data->nt_ids.at(s.name);
      } else if (s.is_slot()) {
        id = data->slot_ids.at(s.name);
      } else {
        auto [it, inserted] = data->terminal_ids.emplace(s.name, static_cast<int>(data->terminal_names.size()));
        if (inserted) data->terminal_names.push_back(s.name);
        id = it->second;
      }
      cp.rhs.push_back({s.kind, id});
    }
    data->prods.push_back(std::move(cp));
  }
  data->start_id = data->nt_ids.at(start);

  const auto n_nt = data->nt_names.size();
  std::vector<char> nt_productive(n_nt, 0);
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& cp : data->prods) {
      if (nt_productive[cp.lhs]) continue;
      bool ok = std::all_of(cp.rhs.begin(), cp.rhs.end(), [&](const Data::Sym& s) {
        return s.kind != Symbol::Kind::kNonterminal || nt_productive[s.id];
      });
      if (ok) nt_productive[cp.lhs] = changed = true;
    }
  }
  data->recognizer_prods.assign(n_nt, {});
  for (std::size_t i = 0; i < data->prods.size(); ++i) {
    const auto& cp = data->prods[i];
    bool ok = std::all_of(cp.rhs.begin(), cp.rhs.end(), [&](const Data::Sym& s) {
      return s.kind != Symbol::Kind::kNonterminal || nt_productive[s.id];
    });
    data->productive.push_back(ok);
    if (ok) data->recognizer_prods[cp.lhs].push_back(static_cast<int>(i));
  }

  data->min_depth.assign(n_nt, Data::kInfiniteDepth);
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < data->prods.size(); ++i) {
      int d = data->production_min_depth(i);
      auto& cur = data->min_depth[data->prods[i].lhs];
      if (d < cur) cur = d, changed = true;
    }
  }

  for (auto& p : productions) data->productions.push_back(std::make_shared<const SyncProduction>(std::move(p)));
  Grammar g(data);
  data->fingerprint = hex64(fnv1a64(g.to_text()));
  return g;
}

const std::string& Grammar::start() const { return data_->start; }
const std::vector<ProductionRef>& Grammar::productions() const { return data_->productions; }
const std::set<std::string>& Grammar::slot_categories() const { return data_->slot_categories; }

const std::vector<std::size_t>& Grammar::productions_for(const std::string& nonterminal) const {
  static const std::vector<std::size_t> kEmpty;
  auto it = data_->by_lhs.find(nonterminal);
  return it == data_->by_lhs.end() ? kEmpty : it->second;
}

std::set<std::string> Grammar::terminals() const {
  return {data_->terminal_names.begin(), data_->terminal_names.end()};
}

std::string Grammar::fingerprint() const { return data_->fingerprint; }

std::string Grammar::to_text() const {
  std::string out = "start " + data_->start + "\n";
  for (const auto& p : data_->productions) out += production_text(*p) + "\n";
  return out;
}

int Grammar::terminal_id(std::string_view token) const {
  auto it = data_->terminal_ids.find(std::string(token));
  return it == data_->terminal_ids.end() ? -1 : it->second;
}
const std::string& Grammar::terminal_token(int id) const { return data_->terminal_names.at(id); }
int Grammar::slot_id(std::string_view category) const {
  auto it = data_->slot_ids.find(std::string(category));
  return it == data_->slot_ids.end() ? -1 : it->second;
}
const std::string& Grammar::slot_name(int id) const { return data_->slot_names.at(id); }
std::size_t Grammar::num_slots() const { return data_->slot_names.size(); }

Grammar load_grammar(std::string_view text) {
  using K = GrammarError::Kind;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  std::optional<std::string> start;
  std::vector<SyncProduction> productions;
  std::vector<int> production_lines;

  while (std::getline(in, raw)) {
    ++lineno;
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string first;
    ls >> first;
    if (!start) {
      std::string name, extra;
      if (first != "start" || !(ls >> name) || (ls >> extra) || !is_identifier(name))
        throw GrammarError(K::kSyntax, lineno, "expected 'start <NT>' as the first directive");
      start = name;
      continue;
    }
    std::string arrow;
    if (!is_identifier(first) || !(ls >> arrow) || arrow != "->")
      throw GrammarError(K::kSyntax, lineno, "expected '<NT> -> canonical => logical'");

    // The logical template is the raw text after the first standalone "=>".
    auto body_start = line.find("->") + 2;
    std::size_t sep = std::string::npos;
    for (auto pos = line.find("=>", body_start); pos != std::string::npos; pos = line.find("=>", pos + 2)) {
      bool left = std::isspace(static_cast<unsigned char>(line[pos - 1]));
      bool right = pos + 2 == line.size() || std::isspace(static_cast<unsigned char>(line[pos + 2]));
      if (left && right) {
        sep = pos;
        break;
      }
    }
    if (sep == std::string::npos) throw GrammarError(K::kSyntax, lineno, "missing '=>' separator");
    SyncProduction p;
    p.lhs = first;
    p.logical_template = trim(std::string_view(line).substr(sep + 2));
    if (p.logical_template.empty()) throw GrammarError(K::kSyntax, lineno, "empty logical template");

    std::istringstream cs(line.substr(body_start, sep - body_start));
    std::string tok;
    while (cs >> tok) {
      if (tok.size() > 2 && tok.front() == '<' && tok.back() == '>') {
        auto inner = tok.substr(1, tok.size() - 2);
        if (inner.rfind("slot:", 0) == 0) {
          auto cat = inner.substr(5);
          if (!is_identifier(cat)) throw GrammarError(K::kSyntax, lineno, "bad slot category in " + tok);
          p.canonical_rhs.push_back(Symbol::slot(cat));
        } else {
          if (!is_identifier(inner)) throw GrammarError(K::kSyntax, lineno, "bad nonterminal " + tok);
          p.canonical_rhs.push_back(Symbol::nonterminal(inner));
        }
        continue;
      }
      for (auto& t : tokenize(tok)) p.canonical_rhs.push_back(Symbol::terminal(std::move(t)));
    }
    if (p.canonical_rhs.empty()) throw GrammarError(K::kSyntax, lineno, "empty canonical side");
    productions.push_back(std::move(p));
    production_lines.push_back(lineno);
  }
  if (!start) throw GrammarError(K::kSyntax, lineno == 0 ? 1 : lineno, "no start symbol");

  // Validate here as well so errors carry the line of the offending production.
  std::set<std::string> defined;
  for (const auto& p : productions) defined.insert(p.lhs);
  for (std::size_t i = 0; i < productions.size(); ++i)
    for (const auto& s : productions[i].canonical_rhs)
      if (s.is_nonterminal() && !defined.count(s.name))
        throw GrammarError(K::kUndefinedNonterminal, production_lines[i], "undefined nonterminal '" + s.name + "'");
  for (std::size_t i = 0; i < productions.size(); ++i) {
    try {
      prepare_production(productions[i]);
    } catch (const GrammarError& e) {
      throw GrammarError(e.kind(), production_lines[i], e.what());
    }
  }
  return Grammar::create(*start, std::move(productions));
}

Grammar load_grammar_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open grammar file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_grammar(ss.str());
}

}  // namespace privaug
