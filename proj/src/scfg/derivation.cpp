#include "privaug/scfg.hpp"

namespace privaug {

bool well_formed(const Derivation& d) {
  if (!d.production) return false;
  std::size_t k = 0;
  for (const auto& sym : d.production->canonical_rhs) {
    if (sym.is_terminal()) continue;
    if (k >= d.children.size()) return false;
    const auto& child = d.children[k++];
    if (sym.is_slot()) {
      if (!child.is_slot()) return false;
      if (child.slot().category != sym.name || child.slot().value.empty()) return false;
    } else {
      if (child.is_slot()) return false;
      const auto& sub = child.derivation();
      if (!sub.production || sub.production->lhs != sym.name || !well_formed(sub)) return false;
    }
  }
  return k == d.children.size();
}

bool same_shape(const Derivation& a, const Derivation& b) {
  if (a.production != b.production &&
      (!a.production || !b.production || a.production->index != b.production->index ||
       a.production->lhs != b.production->lhs))
    return false;
  if (a.children.size() != b.children.size()) return false;
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    const auto& x = a.children[i];
    const auto& y = b.children[i];
    if (x.is_slot() != y.is_slot()) return false;
    if (x.is_slot()) {
      if (x.slot().category != y.slot().category) return false;
    } else if (!same_shape(x.derivation(), y.derivation())) {
      return false;
    }
  }
  return true;
}

namespace {

void render_into(const Derivation& d, Tokens& out) {
  std::size_t k = 0;
  for (const auto& sym : d.production->canonical_rhs) {
    if (sym.is_terminal()) {
      out.push_back(sym.name);
      continue;
    }
    const auto& child = d.children.at(k++);
    if (child.is_slot()) out.insert(out.end(), child.slot().value.begin(), child.slot().value.end());
    else render_into(child.derivation(), out);
  }
}

}  // namespace

Tokens render_canonical(const Derivation& d) {
  Tokens out;
  render_into(d, out);
  return out;
}

std::string render_logical(const Derivation& d) {
  std::string out;
  for (const auto& piece : d.production->pieces) {
    if (!piece.hole) {
      out += piece.literal;
      continue;
    }
    const auto& child = d.children.at(*piece.hole);
    if (child.is_slot()) out += "\"" + join(child.slot().value) + "\"";
    else out += render_logical(child.derivation());
  }
  return out;
}

}  // namespace privaug
