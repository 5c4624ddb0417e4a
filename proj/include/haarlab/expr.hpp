#pragma once

#include <memory>
#include <string>
#include <vector>

#include "haarlab/cellset.hpp"

namespace haarlab {

// Set expressions:
//   ball:<c1>,<c2>,...:<r>          ("e" for the identity)
//   tube:<subgroup>:<delta>
//   rect:<subgroup>:<h1>,...:<delta>:<rho>
//   box:<lo1>,...:<len1>,...        (tori)
//   union(<e1>,<e2>)  inter(<e1>,<e2>)  translate(<e>,<g1>,...)
//   file:<path>                      (stored cell set)
struct Expr {
    enum class Kind { Ball, Tube, Rect, Box, Union, Inter, Translate, File };
    Kind kind;
    std::vector<double> point;   // ball center, rect base point, translation
    std::vector<double> extra;   // box lengths
    std::string name;            // subgroup name or file path
    double a = 0.0, b = 0.0, c = 0.0;
    std::vector<std::shared_ptr<const Expr>> args;
    int column = 1;
};
using ExprPtr = std::shared_ptr<const Expr>;

class ExpressionError : public std::invalid_argument {
public:
    ExpressionError(const std::string& msg, int line, int column);
    int line, column;
};

ExprPtr parse_expression(const std::string& text);
std::string to_string(const Expr& e);
bool references_file(const Expr& e);

// Region form; throws std::invalid_argument for expressions with file leaves.
RegionPtr expression_region(const Expr& e, const GroupPtr& G);
// Cell set on the net: one discretization of the whole region when possible,
// otherwise cell-set algebra over the leaves.
CellSet evaluate_expression(const Expr& e, const NetPtr& net);

}  // namespace haarlab
