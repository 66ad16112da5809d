/*
 * Copyright 2026 The cautious-rl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// LTL formulae: AST, parser, printer and the eventually/always rewrite.
//
// Surface syntax (ASCII):
//   true, identifiers [a-zA-Z_][a-zA-Z0-9_]*, ! (not), & (and),
//   X (next), F (eventually), G (always), U (until), parentheses.
//   `a | b` is accepted as sugar for !(!a & !b).
// Precedence, tightest first: unary operators, &, |, U.  & and | are
// left-associative, U is right-associative.

#pragma once

#include <cctype>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace crl::ltl {

enum class Kind { True, Atom, And, Not, Next, Until, Eventually, Always };

class Formula {
 public:
  using Ptr = std::shared_ptr<const Formula>;

  static Formula truth() { return Formula(Kind::True, {}, nullptr, nullptr); }
  static Formula atom(std::string name) {
    return Formula(Kind::Atom, std::move(name), nullptr, nullptr);
  }
  static Formula conj(Formula l, Formula r) { return binary(Kind::And, std::move(l), std::move(r)); }
  static Formula until(Formula l, Formula r) { return binary(Kind::Until, std::move(l), std::move(r)); }
  static Formula negation(Formula f) { return unary(Kind::Not, std::move(f)); }
  static Formula next(Formula f) { return unary(Kind::Next, std::move(f)); }
  static Formula eventually(Formula f) { return unary(Kind::Eventually, std::move(f)); }
  static Formula always(Formula f) { return unary(Kind::Always, std::move(f)); }

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  // Operand of unary nodes, left operand of binary nodes.
  const Formula& lhs() const { return *lhs_; }
  const Formula& rhs() const { return *rhs_; }
  const Formula& operand() const { return *lhs_; }

  bool is_unary() const {
    return kind_ == Kind::Not || kind_ == Kind::Next || kind_ == Kind::Eventually ||
           kind_ == Kind::Always;
  }
  bool is_binary() const { return kind_ == Kind::And || kind_ == Kind::Until; }

  friend bool operator==(const Formula& a, const Formula& b) {
    if (a.kind_ != b.kind_) return false;
    if (a.kind_ == Kind::Atom) return a.name_ == b.name_;
    if (a.is_unary()) return a.operand() == b.operand();
    if (a.is_binary()) return a.lhs() == b.lhs() && a.rhs() == b.rhs();
    return true;
  }

 private:
  Formula(Kind k, std::string name, Ptr l, Ptr r)
      : kind_(k), name_(std::move(name)), lhs_(std::move(l)), rhs_(std::move(r)) {}
  static Formula unary(Kind k, Formula f) {
    return Formula(k, {}, std::make_shared<const Formula>(std::move(f)), nullptr);
  }
  static Formula binary(Kind k, Formula l, Formula r) {
    return Formula(k, {}, std::make_shared<const Formula>(std::move(l)),
                   std::make_shared<const Formula>(std::move(r)));
  }

  Kind kind_;
  std::string name_;
  Ptr lhs_;
  Ptr rhs_;
};

class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

inline bool is_reserved(std::string_view word) {
  return word == "true" || word == "X" || word == "F" || word == "G" || word == "U";
}

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Formula parse() {
    skip_space();
    if (pos_ == text_.size()) throw SyntaxError("empty formula", pos_);
    Formula f = parse_until();
    skip_space();
    if (pos_ != text_.size()) throw SyntaxError(unexpected(), pos_);
    return f;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  static bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
  }
  static bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  }

  // Peeks the next word without consuming it; empty if not an identifier.
  std::string_view peek_word() {
    skip_space();
    if (pos_ >= text_.size() || !ident_start(text_[pos_])) return {};
    std::size_t end = pos_;
    while (end < text_.size() && ident_char(text_[end])) ++end;
    return text_.substr(pos_, end - pos_);
  }

  bool accept_char(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::string unexpected() const {
    if (pos_ >= text_.size()) return "unexpected end of input";
    return std::string("unexpected token '") + text_[pos_] + "'";
  }

  Formula parse_until() {
    Formula lhs = parse_or();
    if (peek_word() == "U") {
      pos_ += 1;
      return Formula::until(std::move(lhs), parse_until());
    }
    return lhs;
  }

  Formula parse_or() {
    Formula lhs = parse_and();
    while (accept_char('|')) {
      Formula rhs = parse_and();
      lhs = Formula::negation(Formula::conj(Formula::negation(std::move(lhs)),
                                            Formula::negation(std::move(rhs))));
    }
    return lhs;
  }

  Formula parse_and() {
    Formula lhs = parse_unary();
    while (accept_char('&')) lhs = Formula::conj(std::move(lhs), parse_unary());
    return lhs;
  }

  Formula parse_unary() {
    if (accept_char('!')) return Formula::negation(parse_unary());
    std::string_view word = peek_word();
    if (word == "X" || word == "F" || word == "G") {
      pos_ += 1;
      Formula f = parse_unary();
      if (word == "X") return Formula::next(std::move(f));
      if (word == "F") return Formula::eventually(std::move(f));
      return Formula::always(std::move(f));
    }
    return parse_primary();
  }

  Formula parse_primary() {
    skip_space();
    if (accept_char('(')) {
      Formula f = parse_until();
      if (!accept_char(')')) throw SyntaxError("expected ')'", pos_);
      return f;
    }
    std::string_view word = peek_word();
    if (word.empty()) throw SyntaxError(unexpected(), pos_);
    if (word == "U") throw SyntaxError("'U' without left operand", pos_);
    pos_ += word.size();
    if (word == "true") return Formula::truth();
    return Formula::atom(std::string(word));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

inline void collect_atoms(const Formula& f, std::set<std::string>& out) {
  if (f.kind() == Kind::Atom) {
    out.insert(f.name());
  } else if (f.is_unary()) {
    collect_atoms(f.operand(), out);
  } else if (f.is_binary()) {
    collect_atoms(f.lhs(), out);
    collect_atoms(f.rhs(), out);
  }
}

}  // namespace detail

// Throws SyntaxError carrying the byte offset of the first bad token.
inline Formula parse(std::string_view text) { return detail::Parser(text).parse(); }

// Fully parenthesised rendering; parse(to_string(f)) == f.
inline std::string to_string(const Formula& f) {
  switch (f.kind()) {
    case Kind::True: return "true";
    case Kind::Atom: return f.name();
    case Kind::Not: return "!" + to_string(f.operand());
    case Kind::Next: return "X " + to_string(f.operand());
    case Kind::Eventually: return "F " + to_string(f.operand());
    case Kind::Always: return "G " + to_string(f.operand());
    case Kind::And: return "(" + to_string(f.lhs()) + " & " + to_string(f.rhs()) + ")";
    case Kind::Until: return "(" + to_string(f.lhs()) + " U " + to_string(f.rhs()) + ")";
  }
  return {};
}

// Rewrites F p to (true U p) and G p to !(true U !p).
inline Formula desugar(const Formula& f) {
  switch (f.kind()) {
    case Kind::True:
    case Kind::Atom: return f;
    case Kind::Not: return Formula::negation(desugar(f.operand()));
    case Kind::Next: return Formula::next(desugar(f.operand()));
    case Kind::Eventually: return Formula::until(Formula::truth(), desugar(f.operand()));
    case Kind::Always:
      return Formula::negation(
          Formula::until(Formula::truth(), Formula::negation(desugar(f.operand()))));
    case Kind::And: return Formula::conj(desugar(f.lhs()), desugar(f.rhs()));
    case Kind::Until: return Formula::until(desugar(f.lhs()), desugar(f.rhs()));
  }
  return f;
}

inline std::set<std::string> atoms(const Formula& f) {
  std::set<std::string> out;
  detail::collect_atoms(f, out);
  return out;
}

}  // namespace crl::ltl
