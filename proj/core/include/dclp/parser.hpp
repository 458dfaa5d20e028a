#pragma once

#include <stdexcept>
#include <string>

#include "dclp/program.hpp"

namespace dclp {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string message, int line, int column)
      : std::runtime_error(std::to_string(line) + ":" +
                           std::to_string(column) + ": " + message),
        line_(line), column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

// Parses the concrete clause syntax:
//   head :- goal, ..., goal.        ordinary clause ("head." for a fact)
//   rv ~ dist :- goal, ..., goal.   distributional clause
// where dist is a categorical list [p1:v1, ..., pn:vn] or one of
// uniform(List), uniform(Low, High), poisson(Rate), gamma(Shape, Scale).
// The outcome of a random variable t is written ~(t). '%' starts a line
// comment; clauses end with '.'.
Program parse_program(const std::string& source);

// Parses a single atom, e.g. a query; trailing '.' optional.
Atom parse_atom_string(const std::string& source);

// Evidence files: one atom per line, '+atom.' into the positive set and
// '-atom.' into the negative set. The program is consulted to reject
// dist_eq evidence on continuous random variables.
Evidence parse_evidence(const std::string& source, const Program& program);

}  // namespace dclp
