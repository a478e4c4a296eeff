#include "vfrl/pctl.hpp"

#include <cctype>
#include <cmath>

namespace vfrl::pctl {

std::string Bound::to_string() const {
    char buf[80];
    if (lo == 0.0 && !lo_strict) {
        std::snprintf(buf, sizeof(buf), "%s%.12g", hi_strict ? "<" : "<=", hi);
        return buf;
    }
    if (hi == 1.0 && !hi_strict) {
        std::snprintf(buf, sizeof(buf), "%s%.12g", lo_strict ? ">" : ">=", lo);
        return buf;
    }
    std::snprintf(buf, sizeof(buf), "[%.12g,%.12g]", lo, hi);
    return buf;
}

std::string Formula::to_string() const {
    switch (kind) {
        case Kind::True: return "true";
        case Kind::False: return "false";
        case Kind::Atom: return atom;
        case Kind::Not: return "!" + lhs->to_string();
        case Kind::And: return "(" + lhs->to_string() + " & " + rhs->to_string() + ")";
        case Kind::Prob: {
            std::string p = "P" + bound.to_string() + " [ ";
            switch (path.kind) {
                case PathFormula::Kind::Next: p += "X " + path.rhs->to_string(); break;
                case PathFormula::Kind::Until:
                    p += path.lhs->to_string() + " U " + path.rhs->to_string();
                    break;
                case PathFormula::Kind::BoundedUntil:
                    p += path.lhs->to_string() + " U<=" + std::to_string(path.bound) + " " +
                         path.rhs->to_string();
                    break;
            }
            return p + " ]";
        }
    }
    return "?";
}

FormulaPtr make_atom(const std::string& name) {
    auto f = std::make_shared<Formula>();
    f->kind = name == "true" ? Formula::Kind::True
              : name == "false" ? Formula::Kind::False
                                : Formula::Kind::Atom;
    f->atom = name;
    return f;
}

FormulaPtr make_not(FormulaPtr inner) {
    auto f = std::make_shared<Formula>();
    f->kind = Formula::Kind::Not;
    f->lhs = std::move(inner);
    return f;
}

FormulaPtr make_and(FormulaPtr a, FormulaPtr b) {
    auto f = std::make_shared<Formula>();
    f->kind = Formula::Kind::And;
    f->lhs = std::move(a);
    f->rhs = std::move(b);
    return f;
}

FormulaPtr make_prob(Bound b, PathFormula path) {
    auto f = std::make_shared<Formula>();
    f->kind = Formula::Kind::Prob;
    f->bound = b;
    f->path = std::move(path);
    return f;
}

namespace {

class Parser {
public:
    explicit Parser(const std::string& text) : text_(text) {}

    FormulaPtr run() {
        FormulaPtr f = state_formula();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        return f;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw Error("pctl: syntax error at position " + std::to_string(pos_) + ": " + msg);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    bool eat_str(const std::string& s) {
        skip_ws();
        if (text_.compare(pos_, s.size(), s) == 0) {
            pos_ += s.size();
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    double number() {
        skip_ws();
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(text_.substr(pos_), &used);
        } catch (const std::exception&) {
            fail("expected a number");
        }
        pos_ += used;
        return v;
    }

    double probability() {
        const double v = number();
        if (!(v >= 0.0 && v <= 1.0)) throw Error("pctl: probability out of range [0,1]");
        return v;
    }

    int integer() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (pos_ == start) fail("expected an integer bound");
        return std::stoi(text_.substr(start, pos_ - start));
    }

    std::string identifier() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        if (pos_ == start) fail("expected an identifier");
        return text_.substr(start, pos_ - start);
    }

    // conjunction of unary formulas
    FormulaPtr state_formula() {
        FormulaPtr f = unary();
        while (true) {
            skip_ws();
            if (eat_str("&&") || eat('&')) {
                f = make_and(f, unary());
            } else {
                return f;
            }
        }
    }

    FormulaPtr unary() {
        skip_ws();
        if (eat('!')) return make_not(unary());
        if (eat('(')) {
            FormulaPtr f = state_formula();
            if (!eat(')')) fail("expected ')'");
            return f;
        }
        if (peek() == 'P' && is_prob_operator()) return prob_formula();
        const std::string name = identifier();
        return make_atom(name);
    }

    // 'P' starts a probability operator only when followed by a bound; bare
    // identifiers beginning with P stay atoms.
    bool is_prob_operator() {
        const std::size_t next = pos_ + 1;
        if (next >= text_.size()) return false;
        const char c = text_[next];
        return c == '>' || c == '<' || c == '[' || c == '=';
    }

    FormulaPtr prob_formula() {
        if (!eat('P')) fail("expected 'P'");
        Bound b;
        if (eat_str(">=")) {
            b.lo = probability();
        } else if (eat_str("<=")) {
            b.hi = probability();
        } else if (eat('>')) {
            b.lo = probability();
            b.lo_strict = true;
        } else if (eat('<')) {
            b.hi = probability();
            b.hi_strict = true;
        } else if (eat('[')) {
            b.lo = probability();
            if (!eat(',')) fail("expected ',' in probability interval");
            b.hi = probability();
            if (!eat(']')) fail("expected ']' after probability interval");
            if (b.lo > b.hi) throw Error("pctl: empty probability interval");
        } else {
            fail("expected a probability bound after 'P'");
        }
        if (!eat('[')) fail("expected '[' to open the path formula");
        PathFormula path;
        skip_ws();
        if (peek() == 'X' && is_next_operator()) {
            ++pos_;
            path.kind = PathFormula::Kind::Next;
            path.rhs = state_formula();
        } else {
            path.lhs = state_formula();
            skip_ws();
            if (!eat_until_token()) fail("expected 'U' in path formula");
            if (eat_str("<=")) {
                path.kind = PathFormula::Kind::BoundedUntil;
                path.bound = integer();
                if (path.bound < 0) throw Error("pctl: step bound must be >= 0");
            } else {
                path.kind = PathFormula::Kind::Until;
            }
            path.rhs = state_formula();
        }
        if (!eat(']')) fail("expected ']' to close the path formula");
        return make_prob(b, std::move(path));
    }

    bool is_next_operator() {
        const std::size_t next = pos_ + 1;
        if (next >= text_.size()) return true;
        const char c = text_[next];
        return !(std::isalnum(static_cast<unsigned char>(c)) || c == '_');
    }

    // 'U' is a token only when not part of a longer identifier ('U<=' is fine).
    bool eat_until_token() {
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] != 'U') return false;
        const std::size_t next = pos_ + 1;
        if (next < text_.size() &&
            (std::isalnum(static_cast<unsigned char>(text_[next])) || text_[next] == '_'))
            return false;
        ++pos_;
        return true;
    }

    const std::string& text_;
    std::size_t pos_ = 0;
};

}  // namespace

FormulaPtr parse(const std::string& text) { return Parser(text).run(); }

}  // namespace vfrl::pctl
