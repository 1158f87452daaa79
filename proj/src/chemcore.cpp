// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "molfusion/chemcore.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <optional>
#include <set>

namespace molfusion::chem {

namespace {

constexpr std::array<std::string_view, 118> kElementSymbols = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",
    "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh",
    "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",  "Re",
    "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db",
    "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

bool is_element(std::string_view symbol) {
  return std::find(kElementSymbols.begin(), kElementSymbols.end(), symbol) != kElementSymbols.end();
}

bool is_aromatic_organic(char c) {
  return c == 'b' || c == 'c' || c == 'n' || c == 'o' || c == 'p' || c == 's';
}

std::string capitalize(std::string_view s) {
  std::string out(s);
  if (!out.empty()) {
    out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  }
  return out;
}

int bond_valence(BondOrder order) {
  switch (order) {
    case BondOrder::Double:
      return 2;
    case BondOrder::Triple:
      return 3;
    default:
      return 1;
  }
}

std::vector<int> standard_valences(ElementClass e) {
  switch (e) {
    case ElementClass::B:
      return {3};
    case ElementClass::C:
      return {4};
    case ElementClass::N:
      return {3};
    case ElementClass::O:
      return {2};
    case ElementClass::P:
      return {3, 5};
    case ElementClass::S:
      return {2, 4, 6};
    case ElementClass::F:
    case ElementClass::Cl:
    case ElementClass::Br:
    case ElementClass::I:
      return {1};
    default:
      return {};
  }
}

std::optional<BondOrder> explicit_order(std::string_view text) {
  if (text == "-") return BondOrder::Single;
  if (text == "=") return BondOrder::Double;
  if (text == "#") return BondOrder::Triple;
  if (text == ":") return BondOrder::Aromatic;
  return std::nullopt;  // '/' and '\' carry only stereo
}

Atom parse_bracket_atom(std::string_view text, std::size_t offset) {
  // text includes the surrounding brackets
  const std::string_view body = text.substr(1, text.size() - 2);
  auto fail = [&](const std::string& why) -> Atom {
    throw SmilesError(SmilesErrorKind::InvalidBracketAtom, offset,
                      "invalid bracket atom '" + std::string(text) + "' at " +
                          std::to_string(offset) + ": " + why);
  };
  std::size_t i = 0;
  auto peek = [&]() -> char { return i < body.size() ? body[i] : '\0'; };

  while (std::isdigit(static_cast<unsigned char>(peek()))) ++i;  // isotope

  Atom atom;
  atom.bracket = true;
  const char c = peek();
  if (c == '*') {
    atom.symbol = "*";
    ++i;
  } else if (std::isupper(static_cast<unsigned char>(c))) {
    std::string sym(1, c);
    ++i;
    const char next = peek();
    if (std::islower(static_cast<unsigned char>(next)) && is_element(sym + next)) {
      sym.push_back(next);
      ++i;
    }
    atom.symbol = sym;
  } else if (std::islower(static_cast<unsigned char>(c))) {
    const std::string_view rest = body.substr(i);
    if (rest.starts_with("se") || rest.starts_with("as") || rest.starts_with("te")) {
      atom.symbol = capitalize(rest.substr(0, 2));
      i += 2;
    } else if (is_aromatic_organic(c)) {
      atom.symbol = capitalize(rest.substr(0, 1));
      ++i;
    } else {
      return fail("unknown aromatic symbol");
    }
    atom.aromatic = true;
  } else {
    return fail("missing element symbol");
  }
  atom.element = element_class(atom.symbol);

  // chirality: @, @@, @TH1, @SP2, @OH12 ...
  if (peek() == '@') {
    while (peek() == '@') ++i;
    if (std::isupper(static_cast<unsigned char>(peek())) && peek() != 'H') {
      while (std::isupper(static_cast<unsigned char>(peek()))) ++i;
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++i;
    }
  }
  if (peek() == 'H') {
    ++i;
    atom.explicit_h = 1;
    if (std::isdigit(static_cast<unsigned char>(peek()))) {
      atom.explicit_h = peek() - '0';
      ++i;
    }
  }
  if (peek() == '+' || peek() == '-') {
    const char sign = peek();
    const int unit = sign == '+' ? 1 : -1;
    ++i;
    int magnitude = 1;
    if (std::isdigit(static_cast<unsigned char>(peek()))) {
      magnitude = 0;
      while (std::isdigit(static_cast<unsigned char>(peek()))) {
        magnitude = magnitude * 10 + (peek() - '0');
        ++i;
        if (magnitude > 99) break;
      }
    } else {
      while (peek() == sign) {
        ++magnitude;
        ++i;
      }
    }
    if (magnitude > 4) return fail("formal charge magnitude exceeds 4");
    atom.formal_charge = unit * magnitude;
  }
  if (peek() == ':') {
    ++i;
    if (!std::isdigit(static_cast<unsigned char>(peek()))) return fail("empty atom class");
    while (std::isdigit(static_cast<unsigned char>(peek()))) ++i;
  }
  if (i != body.size()) return fail("unexpected trailing characters");
  return atom;
}

void assign_implicit_hydrogens(Molecule& mol) {
  std::vector<int> valence_sum(mol.num_atoms(), 0);
  for (const Bond& b : mol.bonds) {
    valence_sum[b.begin] += bond_valence(b.order);
    valence_sum[b.end] += bond_valence(b.order);
  }
  for (Atom& atom : mol.atoms) {
    if (atom.bracket) continue;
    const int sum = valence_sum[atom.index];
    const std::vector<int> allowed = standard_valences(atom.element);
    auto it = std::find_if(allowed.begin(), allowed.end(), [&](int v) { return v >= sum; });
    if (it == allowed.end()) {
      throw SmilesError(SmilesErrorKind::ValenceOverflow, atom.index,
                        "valence overflow on atom " + std::to_string(atom.index) + " (" +
                            atom.symbol + ", bond order sum " + std::to_string(sum) + ")");
    }
    // An aromatic atom donates one unit of valence to the delocalized system.
    atom.implicit_h = atom.aromatic ? std::max(0, *it - sum - 1) : *it - sum;
  }
}

}  // namespace

ElementClass element_class(std::string_view symbol) {
  static const std::map<std::string_view, ElementClass> kClasses = {
      {"B", ElementClass::B},   {"C", ElementClass::C},   {"N", ElementClass::N},
      {"O", ElementClass::O},   {"P", ElementClass::P},   {"S", ElementClass::S},
      {"F", ElementClass::F},   {"Cl", ElementClass::Cl}, {"Br", ElementClass::Br},
      {"I", ElementClass::I},   {"H", ElementClass::H}};
  auto it = kClasses.find(symbol);
  return it == kClasses.end() ? ElementClass::Other : it->second;
}

const char* to_string(SmilesErrorKind kind) {
  switch (kind) {
    case SmilesErrorKind::EmptyInput:
      return "EmptyInput";
    case SmilesErrorKind::UnknownCharacter:
      return "UnknownCharacter";
    case SmilesErrorKind::UnterminatedBracket:
      return "UnterminatedBracket";
    case SmilesErrorKind::InvalidBracketAtom:
      return "InvalidBracketAtom";
    case SmilesErrorKind::UnmatchedRingClosure:
      return "UnmatchedRingClosure";
    case SmilesErrorKind::UnclosedBranch:
      return "UnclosedBranch";
    case SmilesErrorKind::MisplacedBranch:
      return "MisplacedBranch";
    case SmilesErrorKind::MisplacedBond:
      return "MisplacedBond";
    case SmilesErrorKind::DuplicateBond:
      return "DuplicateBond";
    case SmilesErrorKind::MultiFragmentInput:
      return "MultiFragmentInput";
    case SmilesErrorKind::ValenceOverflow:
      return "ValenceOverflow";
  }
  return "Unknown";
}

SmilesError::SmilesError(SmilesErrorKind kind, std::size_t detail, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(detail) {}

std::size_t Molecule::degree(std::size_t atom) const {
  return static_cast<std::size_t>(std::count_if(bonds.begin(), bonds.end(), [&](const Bond& b) {
    return b.begin == atom || b.end == atom;
  }));
}

std::vector<std::vector<std::size_t>> Molecule::adjacency() const {
  std::vector<std::vector<std::size_t>> adj(atoms.size());
  for (std::size_t b = 0; b < bonds.size(); ++b) {
    adj[bonds[b].begin].push_back(b);
    adj[bonds[b].end].push_back(b);
  }
  return adj;
}

TokenizedSmiles tokenize(std::string_view smiles) {
  if (smiles.empty()) {
    throw SmilesError(SmilesErrorKind::EmptyInput, 0, "empty SMILES");
  }
  TokenizedSmiles out;
  std::size_t i = 0;
  auto push = [&](TokenKind kind, std::size_t len) {
    out.tokens.push_back(Token{kind, std::string(smiles.substr(i, len)), i});
    i += len;
  };
  auto unknown = [&](std::size_t pos) {
    throw SmilesError(SmilesErrorKind::UnknownCharacter, pos,
                      "unknown character '" + std::string(1, smiles[pos]) + "' at position " +
                          std::to_string(pos));
  };
  while (i < smiles.size()) {
    const char c = smiles[i];
    const char next = i + 1 < smiles.size() ? smiles[i + 1] : '\0';
    switch (c) {
      case '[': {
        const std::size_t close = smiles.find_first_of("[]", i + 1);
        if (close == std::string_view::npos || smiles[close] == '[') {
          throw SmilesError(SmilesErrorKind::UnterminatedBracket, i,
                            "unterminated bracket atom at position " + std::to_string(i));
        }
        push(TokenKind::Atom, close - i + 1);
        break;
      }
      case 'B':
        push(TokenKind::Atom, next == 'r' ? 2 : 1);
        break;
      case 'C':
        push(TokenKind::Atom, next == 'l' ? 2 : 1);
        break;
      case 'N':
      case 'O':
      case 'P':
      case 'S':
      case 'F':
      case 'I':
      case 'b':
      case 'c':
      case 'n':
      case 'o':
      case 'p':
      case 's':
        push(TokenKind::Atom, 1);
        break;
      case '-':
      case '=':
      case '#':
      case ':':
      case '/':
      case '\\':
        push(TokenKind::Bond, 1);
        break;
      case '(':
        push(TokenKind::BranchOpen, 1);
        break;
      case ')':
        push(TokenKind::BranchClose, 1);
        break;
      case '.':
        push(TokenKind::Dot, 1);
        break;
      case '%':
        if (i + 2 < smiles.size() && std::isdigit(static_cast<unsigned char>(smiles[i + 1])) &&
            std::isdigit(static_cast<unsigned char>(smiles[i + 2]))) {
          push(TokenKind::RingDigit, 3);
        } else {
          unknown(i);
        }
        break;
      default:
        if (std::isdigit(static_cast<unsigned char>(c))) {
          push(TokenKind::RingDigit, 1);
        } else {
          unknown(i);
        }
    }
  }
  for (std::size_t t = 0; t < out.tokens.size(); ++t) {
    if (out.tokens[t].kind == TokenKind::Atom) {
      out.atom_map.push_back(out.atom_token_index.size());
      out.atom_token_index.push_back(t);
    }
  }
  return out;
}

std::string detokenize(const TokenizedSmiles& tok) {
  std::string out;
  for (const Token& t : tok.tokens) out += t.text;
  return out;
}

ParsedSmiles parse(std::string_view smiles) {
  ParsedSmiles result;
  result.tokens = tokenize(smiles);
  Molecule& mol = result.molecule;

  struct PendingBond {
    std::string text;
    std::size_t offset;
  };
  struct OpenRing {
    std::size_t atom;
    std::optional<PendingBond> bond;
  };

  std::optional<std::size_t> prev;
  std::optional<PendingBond> pending;
  std::vector<std::pair<std::size_t, std::size_t>> branch_stack;  // (atom, atom count at open)
  std::map<int, OpenRing> rings;
  std::vector<bool> implicit_order;  // per bond: order came from the default rule
  std::set<std::pair<std::size_t, std::size_t>> bonded;

  auto misplaced_bond = [](std::size_t offset) {
    throw SmilesError(SmilesErrorKind::MisplacedBond, offset,
                      "misplaced bond symbol at position " + std::to_string(offset));
  };
  auto add_bond = [&](std::size_t a, std::size_t b, const std::optional<PendingBond>& sym,
                      const std::optional<PendingBond>& other_sym, std::size_t offset) {
    const auto key = std::minmax(a, b);
    if (a == b || bonded.count(key) != 0) {
      throw SmilesError(SmilesErrorKind::DuplicateBond, offset,
                        "duplicate bond between atoms " + std::to_string(key.first) + " and " +
                            std::to_string(key.second));
    }
    std::optional<BondOrder> order;
    if (sym) order = explicit_order(sym->text);
    if (other_sym) {
      const auto o2 = explicit_order(other_sym->text);
      if (order && o2 && *order != *o2) misplaced_bond(other_sym->offset);
      if (!order) order = o2;
    }
    const bool implicit = !order.has_value();
    if (!order) {
      order = mol.atoms[a].aromatic && mol.atoms[b].aromatic ? BondOrder::Aromatic
                                                              : BondOrder::Single;
    }
    bonded.insert(key);
    mol.bonds.push_back(Bond{a, b, *order});
    implicit_order.push_back(implicit);
  };

  for (const Token& tok : result.tokens.tokens) {
    switch (tok.kind) {
      case TokenKind::Dot:
        throw SmilesError(SmilesErrorKind::MultiFragmentInput, tok.offset,
                          "multi-fragment SMILES ('.' at position " + std::to_string(tok.offset) +
                              ")");
      case TokenKind::Atom: {
        Atom atom;
        if (tok.text.front() == '[') {
          atom = parse_bracket_atom(tok.text, tok.offset);
        } else {
          atom.aromatic = std::islower(static_cast<unsigned char>(tok.text.front())) != 0;
          atom.symbol = capitalize(tok.text);
          atom.element = element_class(atom.symbol);
        }
        atom.index = mol.atoms.size();
        mol.atoms.push_back(std::move(atom));
        const std::size_t idx = mol.atoms.size() - 1;
        if (prev) {
          add_bond(*prev, idx, pending, std::nullopt, tok.offset);
        } else if (pending) {
          misplaced_bond(pending->offset);
        }
        pending.reset();
        prev = idx;
        break;
      }
      case TokenKind::Bond:
        if (pending || !prev) misplaced_bond(tok.offset);
        pending = PendingBond{tok.text, tok.offset};
        break;
      case TokenKind::BranchOpen:
        if (!prev) {
          throw SmilesError(SmilesErrorKind::MisplacedBranch, tok.offset,
                            "branch opened before any atom at position " +
                                std::to_string(tok.offset));
        }
        if (pending) misplaced_bond(pending->offset);
        branch_stack.emplace_back(*prev, mol.atoms.size());
        break;
      case TokenKind::BranchClose: {
        if (branch_stack.empty() || branch_stack.back().second == mol.atoms.size()) {
          throw SmilesError(SmilesErrorKind::MisplacedBranch, tok.offset,
                            "unmatched or empty branch at position " + std::to_string(tok.offset));
        }
        if (pending) misplaced_bond(pending->offset);
        prev = branch_stack.back().first;
        branch_stack.pop_back();
        break;
      }
      case TokenKind::RingDigit: {
        const int digit = tok.text.front() == '%' ? std::stoi(tok.text.substr(1)) : tok.text[0] - '0';
        if (!prev) {
          throw SmilesError(SmilesErrorKind::UnmatchedRingClosure, static_cast<std::size_t>(digit),
                            "ring closure " + std::to_string(digit) + " before any atom");
        }
        auto it = rings.find(digit);
        if (it == rings.end()) {
          rings.emplace(digit, OpenRing{*prev, pending});
        } else {
          add_bond(it->second.atom, *prev, it->second.bond, pending, tok.offset);
          rings.erase(it);
        }
        pending.reset();
        break;
      }
    }
  }
  if (pending) misplaced_bond(pending->offset);
  if (!branch_stack.empty()) {
    throw SmilesError(SmilesErrorKind::UnclosedBranch, branch_stack.back().first,
                      "unclosed branch");
  }
  if (!rings.empty()) {
    const int digit = rings.begin()->first;
    throw SmilesError(SmilesErrorKind::UnmatchedRingClosure, static_cast<std::size_t>(digit),
                      "unmatched ring closure " + std::to_string(digit));
  }

  // Implicit aromatic-aromatic bonds outside rings (biaryl links) are single.
  const RingInfo rings_found = ring_info(mol);
  for (std::size_t b = 0; b < mol.bonds.size(); ++b) {
    if (implicit_order[b] && mol.bonds[b].order == BondOrder::Aromatic &&
        !rings_found.bond_in_ring[b]) {
      mol.bonds[b].order = BondOrder::Single;
    }
  }
  assign_implicit_hydrogens(mol);
  return result;
}

RingInfo ring_info(const Molecule& mol) {
  const std::size_t n = mol.num_atoms();
  RingInfo info;
  info.atom_in_ring.assign(n, false);
  info.bond_in_ring.assign(mol.num_bonds(), true);
  const auto adj = mol.adjacency();

  // Iterative Tarjan bridge finding.
  std::vector<std::size_t> disc(n, 0);
  std::vector<std::size_t> low(n, 0);
  std::size_t timer = 1;
  struct Frame {
    std::size_t atom;
    std::size_t parent_bond;
    std::size_t next;
  };
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  for (std::size_t root = 0; root < n; ++root) {
    if (disc[root] != 0) continue;
    std::vector<Frame> stack{{root, kNone, 0}};
    disc[root] = low[root] = timer++;
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next < adj[f.atom].size()) {
        const std::size_t bond = adj[f.atom][f.next++];
        if (bond == f.parent_bond) continue;
        const std::size_t to = mol.bonds[bond].other(f.atom);
        if (disc[to] == 0) {
          disc[to] = low[to] = timer++;
          stack.push_back({to, bond, 0});
        } else {
          low[f.atom] = std::min(low[f.atom], disc[to]);
        }
      } else {
        const Frame done = f;
        stack.pop_back();
        if (!stack.empty()) {
          const std::size_t parent = stack.back().atom;
          low[parent] = std::min(low[parent], low[done.atom]);
          if (low[done.atom] > disc[parent]) info.bond_in_ring[done.parent_bond] = false;
        }
      }
    }
  }
  for (std::size_t b = 0; b < mol.num_bonds(); ++b) {
    if (info.bond_in_ring[b]) {
      info.atom_in_ring[mol.bonds[b].begin] = true;
      info.atom_in_ring[mol.bonds[b].end] = true;
    }
  }
  return info;
}

AtomFeatures featurize(const Molecule& mol) {
  namespace off = feature_offset;
  AtomFeatures f;
  f.num_atoms = mol.num_atoms();
  f.atom.assign(f.num_atoms * kAtomFeatureDim, 0.0);
  f.bond.assign(mol.num_bonds() * kBondFeatureDim, 0.0);
  f.in_ring = ring_info(mol).atom_in_ring;

  std::vector<std::size_t> degree(f.num_atoms, 0);
  for (const Bond& b : mol.bonds) {
    ++degree[b.begin];
    ++degree[b.end];
  }
  for (std::size_t a = 0; a < f.num_atoms; ++a) {
    const Atom& atom = mol.atoms[a];
    double* row = f.atom.data() + a * kAtomFeatureDim;
    row[off::kElement + static_cast<std::size_t>(atom.element)] = 1.0;
    row[off::kDegree + std::min<std::size_t>(degree[a], 6)] = 1.0;
    row[off::kCharge] = atom.formal_charge;
    row[off::kAromatic] = atom.aromatic ? 1.0 : 0.0;
    row[off::kHydrogens + static_cast<std::size_t>(std::clamp(atom.total_h(), 0, 4))] = 1.0;
    row[off::kInRing] = f.in_ring[a] ? 1.0 : 0.0;
  }
  for (std::size_t b = 0; b < mol.num_bonds(); ++b) {
    f.bond[b * kBondFeatureDim + static_cast<std::size_t>(mol.bonds[b].order)] = 1.0;
  }
  return f;
}

}  // namespace molfusion::chem
