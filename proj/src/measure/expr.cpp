#include "haarlab/expr.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <sstream>

namespace haarlab {
namespace {

std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string fmt_list(const std::vector<double>& v) {
    if (v.empty()) return "e";
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
    return s;
}

class Parser {
public:
    explicit Parser(const std::string& t) : t_(t) {}

    ExprPtr parse() {
        auto e = expr();
        skip_ws();
        if (pos_ != t_.size()) fail("unexpected trailing input");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        int line = 1, col = 1;
        for (std::size_t i = 0; i < pos_ && i < t_.size(); ++i) {
            if (t_[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ExpressionError(msg, line, col);
    }

    int column() const {
        int col = 1;
        for (std::size_t i = 0; i < pos_; ++i) col = t_[i] == '\n' ? 1 : col + 1;
        return col;
    }

    void skip_ws() {
        while (pos_ < t_.size() && std::isspace(static_cast<unsigned char>(t_[pos_]))) ++pos_;
    }

    bool accept(const std::string& s) {
        skip_ws();
        if (t_.compare(pos_, s.size(), s) == 0) {
            pos_ += s.size();
            return true;
        }
        return false;
    }

    void expect(char c) {
        skip_ws();
        if (pos_ >= t_.size() || t_[pos_] != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    double number() {
        skip_ws();
        const char* begin = t_.c_str() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("expected a number");
        pos_ += static_cast<std::size_t>(end - begin);
        return v;
    }

    // Comma-separated numbers, or "e" for the identity (empty list).
    std::vector<double> numbers() {
        skip_ws();
        if (pos_ < t_.size() && t_[pos_] == 'e' &&
            (pos_ + 1 == t_.size() || t_[pos_ + 1] == ':' || t_[pos_ + 1] == ')' || t_[pos_ + 1] == ',')) {
            ++pos_;
            return {};
        }
        std::vector<double> v{number()};
        while (true) {
            const auto save = pos_;
            skip_ws();
            if (pos_ < t_.size() && t_[pos_] == ',') {
                ++pos_;
                skip_ws();
                const char* begin = t_.c_str() + pos_;
                char* end = nullptr;
                const double x = std::strtod(begin, &end);
                if (end != begin) {
                    v.push_back(x);
                    pos_ += static_cast<std::size_t>(end - begin);
                    continue;
                }
            }
            pos_ = save;
            return v;
        }
    }

    // [digits ':'] identifier, e.g. "so2_z" or "0:so2_z".
    std::string subgroup_name() {
        skip_ws();
        std::string out;
        std::size_t p = pos_;
        while (p < t_.size() && std::isdigit(static_cast<unsigned char>(t_[p]))) ++p;
        if (p > pos_ && p + 1 < t_.size() && t_[p] == ':' && std::isalpha(static_cast<unsigned char>(t_[p + 1]))) {
            out = t_.substr(pos_, p - pos_ + 1);
            pos_ = p + 1;
        }
        const std::size_t start = pos_;
        while (pos_ < t_.size() && (std::isalnum(static_cast<unsigned char>(t_[pos_])) || t_[pos_] == '_')) ++pos_;
        if (pos_ == start) fail("expected a subgroup name");
        return out + t_.substr(start, pos_ - start);
    }

    ExprPtr expr() {
        skip_ws();
        auto e = std::make_shared<Expr>();
        e->column = column();
        if (accept("union(") || accept("inter(")) {
            e->kind = t_.compare(pos_ - 6, 5, "union") == 0 ? Expr::Kind::Union : Expr::Kind::Inter;
            e->args.push_back(expr());
            expect(',');
            e->args.push_back(expr());
            expect(')');
        } else if (accept("translate(")) {
            e->kind = Expr::Kind::Translate;
            e->args.push_back(expr());
            expect(',');
            e->point = numbers();
            expect(')');
        } else if (accept("ball:")) {
            e->kind = Expr::Kind::Ball;
            e->point = numbers();
            expect(':');
            e->a = number();
        } else if (accept("tube:")) {
            e->kind = Expr::Kind::Tube;
            e->name = subgroup_name();
            expect(':');
            e->a = number();
        } else if (accept("rect:")) {
            e->kind = Expr::Kind::Rect;
            e->name = subgroup_name();
            expect(':');
            e->point = numbers();
            expect(':');
            e->a = number();
            expect(':');
            e->b = number();
        } else if (accept("box:")) {
            e->kind = Expr::Kind::Box;
            e->point = numbers();
            expect(':');
            e->extra = numbers();
            if (e->point.size() != e->extra.size()) fail("box corner and lengths differ in size");
        } else if (accept("file:")) {
            e->kind = Expr::Kind::File;
            const std::size_t start = pos_;
            while (pos_ < t_.size() && t_[pos_] != ',' && t_[pos_] != ')') ++pos_;
            e->name = t_.substr(start, pos_ - start);
            if (e->name.empty()) fail("expected a file path");
        } else {
            fail("expected ball:, tube:, rect:, box:, file:, union(, inter( or translate(");
        }
        return e;
    }

    const std::string& t_;
    std::size_t pos_ = 0;
};

GroupElement element(const GroupPtr& G, const std::vector<double>& v) {
    return v.empty() ? G->identity() : G->element_from_params(v);
}

}  // namespace

ExpressionError::ExpressionError(const std::string& msg, int l, int c)
    : std::invalid_argument("set expression, line " + std::to_string(l) + ", column " + std::to_string(c) +
                            ": " + msg),
      line(l), column(c) {}

ExprPtr parse_expression(const std::string& text) { return Parser(text).parse(); }

std::string to_string(const Expr& e) {
    switch (e.kind) {
        case Expr::Kind::Ball:
            return "ball:" + fmt_list(e.point) + ":" + fmt(e.a);
        case Expr::Kind::Tube:
            return "tube:" + e.name + ":" + fmt(e.a);
        case Expr::Kind::Rect:
            return "rect:" + e.name + ":" + fmt_list(e.point) + ":" + fmt(e.a) + ":" + fmt(e.b);
        case Expr::Kind::Box:
            return "box:" + fmt_list(e.point) + ":" + fmt_list(e.extra);
        case Expr::Kind::Union:
            return "union(" + to_string(*e.args[0]) + "," + to_string(*e.args[1]) + ")";
        case Expr::Kind::Inter:
            return "inter(" + to_string(*e.args[0]) + "," + to_string(*e.args[1]) + ")";
        case Expr::Kind::Translate:
            return "translate(" + to_string(*e.args[0]) + "," + fmt_list(e.point) + ")";
        case Expr::Kind::File:
            return "file:" + e.name;
    }
    return {};
}

bool references_file(const Expr& e) {
    if (e.kind == Expr::Kind::File) return true;
    for (const auto& a : e.args)
        if (references_file(*a)) return true;
    return false;
}

RegionPtr expression_region(const Expr& e, const GroupPtr& G) {
    switch (e.kind) {
        case Expr::Kind::Ball:
            return ball_region(G, element(G, e.point), e.a);
        case Expr::Kind::Tube:
            return tube(builtin_subgroup(G, e.name), e.a);
        case Expr::Kind::Rect: {
            const auto H = builtin_subgroup(G, e.name);
            return rectangle(H, element(G, e.point), e.a, e.b);
        }
        case Expr::Kind::Box:
            return box_region(G, TorusBox{e.point, e.extra});
        case Expr::Kind::Union:
            return union_region(expression_region(*e.args[0], G), expression_region(*e.args[1], G));
        case Expr::Kind::Inter:
            return inter_region(expression_region(*e.args[0], G), expression_region(*e.args[1], G));
        case Expr::Kind::Translate:
            return translate_region(expression_region(*e.args[0], G), element(G, e.point));
        case Expr::Kind::File:
            break;
    }
    throw std::invalid_argument("file: sets have no region form; evaluate them on a net");
}

CellSet evaluate_expression(const Expr& e, const NetPtr& net) {
    const GroupPtr& G = net->group();
    if (!references_file(e)) {
        CellSet s = discretize(*expression_region(e, G), net);
        s.description = to_string(e);
        return s;
    }
    switch (e.kind) {
        case Expr::Kind::File:
            return load_cellset(e.name, net);
        case Expr::Kind::Union:
            return cell_union(evaluate_expression(*e.args[0], net), evaluate_expression(*e.args[1], net));
        case Expr::Kind::Inter:
            return cell_intersection(evaluate_expression(*e.args[0], net), evaluate_expression(*e.args[1], net));
        case Expr::Kind::Translate:
            return translate(evaluate_expression(*e.args[0], net), element(G, e.point));
        default:
            break;
    }
    throw std::logic_error("unreachable expression kind");
}

}  // namespace haarlab
