#pragma once

#include <memory>
#include <string>

#include "vfrl/util.hpp"

namespace vfrl::pctl {

// Probability interval J of a P operator. Bounds are inclusive unless the
// corresponding strict flag is set.
struct Bound {
    double lo = 0.0, hi = 1.0;
    bool lo_strict = false, hi_strict = false;
    bool contains(double p) const {
        const bool above = lo_strict ? p > lo : p >= lo;
        const bool below = hi_strict ? p < hi : p <= hi;
        return above && below;
    }
    std::string to_string() const;
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct PathFormula {
    enum class Kind { Next, Until, BoundedUntil };
    Kind kind = Kind::Next;
    FormulaPtr lhs;  // Until only
    FormulaPtr rhs;  // Next stores its operand here
    int bound = 0;   // BoundedUntil step bound n
};

// State formula over: atom | true | false | !phi | phi & phi | P_J [ path ].
struct Formula {
    enum class Kind { True, False, Atom, Not, And, Prob };
    Kind kind = Kind::True;
    std::string atom;
    FormulaPtr lhs, rhs;
    PathFormula path;  // Prob only
    Bound bound;       // Prob only

    std::string to_string() const;
};

FormulaPtr make_atom(const std::string& name);
FormulaPtr make_not(FormulaPtr f);
FormulaPtr make_and(FormulaPtr a, FormulaPtr b);
FormulaPtr make_prob(Bound b, PathFormula path);

// ASCII grammar, standard precedence (! binds tighter than &, which binds
// tighter than U inside path formulas):
//   P>=0.95 [ !unsafe U goal ]
//   P<=0.01 [ true U<=100 unsafe ]
//   P[0.2,0.4] [ X near_goal ]
// Throws with the character position on syntax errors; probability literals
// outside [0,1] are rejected.
FormulaPtr parse(const std::string& text);

}  // namespace vfrl::pctl
