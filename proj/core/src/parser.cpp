#include "dclp/parser.hpp"

#include <cctype>
#include <cstdlib>
#include <sstream>
#include <unordered_set>

namespace dclp {

namespace {

enum class Tok {
  Name,      // lowercase identifier
  Var,       // uppercase/underscore identifier
  Int,
  Real,
  LParen,
  RParen,
  LBracket,
  RBracket,
  Comma,
  Period,
  If,        // :-
  Tilde,
  Colon,
  Plus,
  Minus,
  Star,
  Slash,
  Pipe,
  End,
};

struct Token {
  Tok kind;
  std::string text;
  long long ival = 0;
  double rval = 0.0;
  int line = 1;
  int col = 1;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) {}

  Token next() {
    skip_space();
    Token t;
    t.line = line_;
    t.col = col_;
    if (pos_ >= src_.size()) {
      t.kind = Tok::End;
      return t;
    }
    char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c))) return lex_number(t);
    if (std::islower(static_cast<unsigned char>(c))) return lex_name(t);
    if (std::isupper(static_cast<unsigned char>(c)) || c == '_')
      return lex_var(t);
    advance();
    switch (c) {
      case '(': t.kind = Tok::LParen; return t;
      case ')': t.kind = Tok::RParen; return t;
      case '[': t.kind = Tok::LBracket; return t;
      case ']': t.kind = Tok::RBracket; return t;
      case ',': t.kind = Tok::Comma; return t;
      case '|': t.kind = Tok::Pipe; return t;
      case '~': t.kind = Tok::Tilde; return t;
      case '+': t.kind = Tok::Plus; return t;
      case '*': t.kind = Tok::Star; return t;
      case '/': t.kind = Tok::Slash; return t;
      case '-': t.kind = Tok::Minus; return t;
      case '.': t.kind = Tok::Period; return t;
      case ':':
        if (pos_ < src_.size() && src_[pos_] == '-') {
          advance();
          t.kind = Tok::If;
          return t;
        }
        t.kind = Tok::Colon;
        return t;
      case '$':
        throw ParseError("identifiers starting with '$' are reserved", t.line,
                         t.col);
      default:
        throw ParseError(std::string("unexpected character '") + c + "'",
                         t.line, t.col);
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '%') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  Token lex_number(Token t) {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           std::isdigit(static_cast<unsigned char>(src_[pos_])))
      advance();
    bool real = false;
    if (pos_ + 1 < src_.size() && src_[pos_] == '.' &&
        std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
      real = true;
      advance();
      while (pos_ < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_])))
        advance();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t mark = pos_;
      advance();
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-'))
        advance();
      if (pos_ < src_.size() &&
          std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        real = true;
        while (pos_ < src_.size() &&
               std::isdigit(static_cast<unsigned char>(src_[pos_])))
          advance();
      } else {
        pos_ = mark;  // 'e' begins an identifier, not an exponent
      }
    }
    std::string text = src_.substr(start, pos_ - start);
    if (real) {
      t.kind = Tok::Real;
      t.rval = std::strtod(text.c_str(), nullptr);
    } else {
      t.kind = Tok::Int;
      t.ival = std::strtoll(text.c_str(), nullptr, 10);
    }
    t.text = std::move(text);
    return t;
  }

  Token lex_name(Token t) {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
            src_[pos_] == '_'))
      advance();
    t.kind = Tok::Name;
    t.text = src_.substr(start, pos_ - start);
    return t;
  }

  Token lex_var(Token t) {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
            src_[pos_] == '_'))
      advance();
    t.kind = Tok::Var;
    t.text = src_.substr(start, pos_ - start);
    return t;
  }

  const std::string& src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  explicit Parser(const std::string& src) : lexer_(src) { shift(); }

  Program parse_program() {
    Program p;
    while (cur_.kind != Tok::End) parse_clause(p);
    finalize_whitelist(p);
    return p;
  }

  Atom parse_single_atom() {
    TermPtr t = parse_goal_term();
    if (cur_.kind == Tok::Period) shift();
    expect(Tok::End, "end of input");
    auto atom = atom_from_term(t);
    if (!atom) fail("expected an atom");
    return *atom;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, cur_.line, cur_.col);
  }

  void shift() { cur_ = lexer_.next(); }

  void expect(Tok k, const std::string& what) {
    if (cur_.kind != k) fail("expected " + what);
  }

  void eat(Tok k, const std::string& what) {
    expect(k, what);
    shift();
  }

  // expr := mul (('+'|'-') mul)*
  TermPtr parse_expr() {
    TermPtr t = parse_mul();
    while (cur_.kind == Tok::Plus || cur_.kind == Tok::Minus) {
      std::string op = cur_.kind == Tok::Plus ? "+" : "-";
      shift();
      TermPtr rhs = parse_mul();
      t = Term::compound(op, {t, rhs});
    }
    return t;
  }

  TermPtr parse_mul() {
    TermPtr t = parse_primary();
    while (cur_.kind == Tok::Star || cur_.kind == Tok::Slash) {
      std::string op = cur_.kind == Tok::Star ? "*" : "/";
      shift();
      TermPtr rhs = parse_primary();
      t = Term::compound(op, {t, rhs});
    }
    return t;
  }

  TermPtr parse_primary() {
    switch (cur_.kind) {
      case Tok::Int: {
        long long v = cur_.ival;
        shift();
        return Term::integer(v);
      }
      case Tok::Real: {
        double v = cur_.rval;
        shift();
        return Term::real(v);
      }
      case Tok::Minus: {
        shift();
        if (cur_.kind == Tok::Int) {
          long long v = cur_.ival;
          shift();
          return Term::integer(-v);
        }
        if (cur_.kind == Tok::Real) {
          double v = cur_.rval;
          shift();
          return Term::real(-v);
        }
        fail("expected a number after unary '-'");
      }
      case Tok::Var: {
        std::string name = cur_.text;
        shift();
        if (name == "_") name = "_A" + std::to_string(anon_counter_++);
        return Term::var(std::move(name));
      }
      case Tok::Tilde: {
        shift();
        eat(Tok::LParen, "'(' after '~'");
        TermPtr inner = parse_expr();
        eat(Tok::RParen, "')'");
        return Term::outcome(inner);
      }
      case Tok::LParen: {
        shift();
        TermPtr t = parse_expr();
        eat(Tok::RParen, "')'");
        return t;
      }
      case Tok::LBracket:
        return parse_list();
      case Tok::Name: {
        std::string name = cur_.text;
        shift();
        if (cur_.kind == Tok::LParen) {
          shift();
          std::vector<TermPtr> args;
          args.push_back(parse_expr());
          while (cur_.kind == Tok::Comma) {
            shift();
            args.push_back(parse_expr());
          }
          eat(Tok::RParen, "')'");
          return Term::compound(std::move(name), std::move(args));
        }
        return Term::symbol(std::move(name));
      }
      default:
        fail("expected a term");
    }
  }

  TermPtr parse_list() {
    eat(Tok::LBracket, "'['");
    std::vector<TermPtr> items;
    TermPtr tail = Term::symbol("[]");
    if (cur_.kind != Tok::RBracket) {
      items.push_back(parse_expr());
      while (cur_.kind == Tok::Comma) {
        shift();
        items.push_back(parse_expr());
      }
      if (cur_.kind == Tok::Pipe) {
        shift();
        tail = parse_expr();
      }
    }
    eat(Tok::RBracket, "']'");
    for (auto it = items.rbegin(); it != items.rend(); ++it)
      tail = Term::compound("[|]", {*it, tail});
    return tail;
  }

  // A goal is an atom-shaped expression, or `Lhs is Rhs`.
  TermPtr parse_goal_term() {
    TermPtr t = parse_expr();
    if (cur_.kind == Tok::Name && cur_.text == "is") {
      shift();
      TermPtr rhs = parse_expr();
      t = Term::compound("is", {t, rhs});
    }
    return t;
  }

  Atom goal_to_atom(const TermPtr& t) {
    auto atom = atom_from_term(t);
    if (!atom) fail("goal must be an atom");
    static const std::unordered_set<std::string> arith = {"+", "-", "*", "/"};
    if (arith.count(atom->pred)) fail("arithmetic expression used as a goal");
    return *atom;
  }

  DistributionTemplate parse_dist_spec() {
    DistributionTemplate d;
    if (cur_.kind == Tok::LBracket) {
      // [p1:v1, ..., pn:vn]
      shift();
      d.kind = DistKind::Categorical;
      while (true) {
        TermPtr p = parse_expr();
        eat(Tok::Colon, "':' in categorical entry");
        TermPtr v = parse_expr();
        d.entries.emplace_back(p, v);
        if (cur_.kind == Tok::Comma) {
          shift();
          continue;
        }
        break;
      }
      eat(Tok::RBracket, "']'");
      return d;
    }
    if (cur_.kind != Tok::Name) fail("expected a distribution");
    std::string name = cur_.text;
    int line = cur_.line, col = cur_.col;
    shift();
    std::vector<TermPtr> args;
    if (cur_.kind == Tok::LParen) {
      shift();
      args.push_back(parse_expr());
      while (cur_.kind == Tok::Comma) {
        shift();
        args.push_back(parse_expr());
      }
      eat(Tok::RParen, "')'");
    }
    if (name == "poisson" && args.size() == 1) {
      d.kind = DistKind::Poisson;
    } else if (name == "gamma" && args.size() == 2) {
      d.kind = DistKind::Gamma;
    } else if (name == "uniform" && args.size() == 1) {
      d.kind = DistKind::UniformDiscrete;
    } else if (name == "uniform" && args.size() == 2) {
      d.kind = DistKind::UniformContinuous;
    } else {
      throw ParseError("unknown distribution constructor " + name + "/" +
                           std::to_string(args.size()),
                       line, col);
    }
    d.params = std::move(args);
    return d;
  }

  void parse_clause(Program& p) {
    int line = cur_.line, col = cur_.col;
    TermPtr head_term = parse_expr();

    if (cur_.kind == Tok::Tilde) {
      // rv ~ dist [:- body].
      shift();
      DistributionalClause dc;
      dc.rv = head_term;
      if (head_term->kind() != Term::Kind::Symbol &&
          head_term->kind() != Term::Kind::Compound)
        throw ParseError("random variable template must be a symbol or "
                         "compound term",
                         line, col);
      dc.dist = parse_dist_spec();
      if (cur_.kind == Tok::If) {
        shift();
        dc.body.push_back(goal_to_atom(parse_goal_term()));
        while (cur_.kind == Tok::Comma) {
          shift();
          dc.body.push_back(goal_to_atom(parse_goal_term()));
        }
      }
      eat(Tok::Period, "'.'");
      p.dist_clauses.push_back(std::move(dc));
      return;
    }

    Clause c;
    auto head = atom_from_term(head_term);
    if (!head) throw ParseError("clause head must be an atom", line, col);
    if (is_dist_rel(head->pred))
      throw ParseError("probabilistic fact predicate " + head->pred +
                           " cannot be a rule head",
                       line, col);
    if (head->pred == "is" || head->pred == "findall" || head->pred == "+" ||
        head->pred == "-" || head->pred == "*" || head->pred == "/")
      throw ParseError("reserved builtin " + head->pred +
                           " cannot be a rule head",
                       line, col);
    c.head = *head;
    if (cur_.kind == Tok::If) {
      shift();
      c.body.push_back(goal_to_atom(parse_goal_term()));
      while (cur_.kind == Tok::Comma) {
        shift();
        c.body.push_back(goal_to_atom(parse_goal_term()));
      }
    }
    eat(Tok::Period, "'.'");
    p.clauses.push_back(std::move(c));
  }

  void finalize_whitelist(Program& p) {
    p.builtin_whitelist.insert("is/2");
    p.builtin_whitelist.insert("findall/3");
    bool user_between = false;
    for (const auto& c : p.clauses)
      if (c.head.pred == "between" && c.head.arity() == 3) user_between = true;
    if (!user_between) p.builtin_whitelist.insert("between/3");
  }

  Lexer lexer_;
  Token cur_;
  int anon_counter_ = 0;
};

}  // namespace

Program parse_program(const std::string& source) {
  return Parser(source).parse_program();
}

Atom parse_atom_string(const std::string& source) {
  return Parser(source).parse_single_atom();
}

namespace {

// Distribution kinds a random-variable term may resolve to, judged by
// unification against the program's distributional clause templates.
bool may_be_continuous(const TermPtr& rv, const Program& program) {
  for (const auto& dc : program.dist_clauses) {
    if (unify(rv, rename_vars(dc.rv, "_ev"))) {
      if (dc.dist.kind == DistKind::Gamma ||
          dc.dist.kind == DistKind::UniformContinuous)
        return true;
    }
  }
  return false;
}

void check_continuous_evidence(const Atom& a, const Program& program,
                               int line) {
  if (a.pred != "dist_eq") return;
  for (const auto& arg : a.args) {
    TermPtr t = arg;
    while (t->kind() == Term::Kind::Outcome) {
      if (may_be_continuous(t->inner(), program))
        throw ParseError(
            "dist_eq evidence on a continuous random variable is not "
            "supported (a sensor model would be required)",
            line, 1);
      t = t->inner();
    }
  }
}

}  // namespace

Evidence parse_evidence(const std::string& source, const Program& program) {
  Evidence e;
  std::istringstream in(source);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (auto pos = line.find('%'); pos != std::string::npos)
      line.erase(pos);
    std::size_t begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    char sign = line[begin];
    if (sign != '+' && sign != '-')
      throw ParseError("evidence line must start with '+' or '-'", line_no,
                       static_cast<int>(begin) + 1);
    Atom a;
    try {
      a = parse_atom_string(line.substr(begin + 1));
    } catch (const ParseError& err) {
      throw ParseError(err.what(), line_no, static_cast<int>(begin) + 2);
    }
    if (!a.is_ground())
      throw ParseError("evidence atoms must be ground", line_no, 1);
    check_continuous_evidence(a, program, line_no);
    if (sign == '+')
      e.positive.push_back(std::move(a));
    else
      e.negative.push_back(std::move(a));
  }
  for (const auto& p : e.positive)
    for (const auto& n : e.negative)
      if (atom_equals(p, n))
        throw ParseError("atom " + atom_to_string(p) +
                             " occurs in both positive and negative evidence",
                         1, 1);
  return e;
}

// ---- pretty printing ----

const char* dist_kind_name(DistKind k) {
  switch (k) {
    case DistKind::Categorical: return "categorical";
    case DistKind::UniformDiscrete: return "uniform";
    case DistKind::UniformContinuous: return "uniform";
    case DistKind::Poisson: return "poisson";
    case DistKind::Gamma: return "gamma";
  }
  return "?";
}

TermPtr DistributionTemplate::as_term() const {
  if (kind == DistKind::Categorical) {
    TermPtr tail = Term::symbol("[]");
    for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
      TermPtr pair = Term::compound(":", {it->first, it->second});
      tail = Term::compound("[|]", {pair, tail});
    }
    return tail;
  }
  return Term::compound(dist_kind_name(kind), params);
}

std::string dist_template_to_string(const DistributionTemplate& d) {
  std::ostringstream os;
  if (d.kind == DistKind::Categorical) {
    os << '[';
    for (std::size_t i = 0; i < d.entries.size(); ++i) {
      if (i) os << ", ";
      os << term_to_string(d.entries[i].first) << ':'
         << term_to_string(d.entries[i].second);
    }
    os << ']';
    return os.str();
  }
  os << dist_kind_name(d.kind) << '(';
  for (std::size_t i = 0; i < d.params.size(); ++i) {
    if (i) os << ", ";
    os << term_to_string(d.params[i]);
  }
  os << ')';
  return os.str();
}

std::string clause_to_string(const Clause& c) {
  std::ostringstream os;
  os << atom_to_string(c.head);
  if (!c.body.empty()) {
    os << " :- ";
    for (std::size_t i = 0; i < c.body.size(); ++i) {
      if (i) os << ", ";
      os << atom_to_string(c.body[i]);
    }
  }
  os << '.';
  return os.str();
}

std::string dist_clause_to_string(const DistributionalClause& c) {
  std::ostringstream os;
  os << term_to_string(c.rv) << " ~ " << dist_template_to_string(c.dist);
  if (!c.body.empty()) {
    os << " :- ";
    for (std::size_t i = 0; i < c.body.size(); ++i) {
      if (i) os << ", ";
      os << atom_to_string(c.body[i]);
    }
  }
  os << '.';
  return os.str();
}

std::string program_to_string(const Program& p) {
  std::ostringstream os;
  for (const auto& c : p.clauses) os << clause_to_string(c) << '\n';
  for (const auto& c : p.dist_clauses) os << dist_clause_to_string(c) << '\n';
  return os.str();
}

}  // namespace dclp
