#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <boost/dynamic_bitset.hpp>

#include "haarlab/net.hpp"
#include "haarlab/region.hpp"
#include "haarlab/subgroup.hpp"

namespace haarlab {

using CellBits = boost::dynamic_bitset<std::uint64_t>;

enum class MeasureMethod { CellBracket, MonteCarlo };
std::string to_string(MeasureMethod m);

struct MeasureEstimate {
    double lower = 0.0;
    double upper = 0.0;
    MeasureMethod method = MeasureMethod::CellBracket;
    std::optional<double> mc_stderr;
    // Center-test (cells) or hit-fraction (Monte Carlo) point value.
    std::optional<double> nominal;
    // False for Monte Carlo intervals and for sets built without depth oracles.
    bool certified = true;

    double width() const { return upper - lower; }
    double mid() const { return 0.5 * (lower + upper); }
    nlohmann::json to_json() const;
};

class NetMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Discretized set: inner cells lie inside the set, the set lies inside the
// outer cells. On scattered nets `depth[i]` is a radius with B(c_i, depth[i])
// inside the set (meaningful on inner cells only; inner iff depth > radius).
struct CellSet {
    NetPtr net;
    CellBits inner;
    CellBits outer;
    std::optional<CellBits> nominal;
    std::vector<double> depth;
    bool certified = true;
    std::string description;

    std::size_t size() const { return net ? net->size() : 0; }
};

CellSet empty_cells(const NetPtr& net);
CellSet full_cells(const NetPtr& net);
// Set with inner = outer = nominal = bits (no certificate).
CellSet cells_from_bits(const NetPtr& net, const CellBits& bits, std::string description = "bits");

// Cells of the net classified against the region. Zonal nets need a region
// with an exact profile for their key.
CellSet discretize(const SetRegion& region, const NetPtr& net);
// Same, testing only the cells set in `mask` (the rest are empty).
CellSet discretize_within(const SetRegion& region, const NetPtr& net, const CellBits& mask);

MeasureEstimate measure(const CellSet& A);

// Bracket for AB. Scattered nets snap products of centers to the nearest
// center; the outer set is dilated by 3 r + snap error (a Voronoi cell meeting
// B(p, 2r) has its center within 3r of p). `threads` splits the pair loop.
CellSet minkowski_product(const CellSet& A, const CellSet& B, int threads = 1);
// gA (Side::Left) or Ag (Side::Right). Unsupported on zonal nets.
CellSet translate(const CellSet& A, const GroupElement& g, Side side = Side::Left);
// A intersected with rectangle(H, h, delta, rho); rho may exceed diam H.
CellSet slice(const CellSet& A, const SubgroupPtr& H, const GroupElement& h, double delta, double rho);
CellSet cell_union(const CellSet& A, const CellSet& B);
CellSet cell_intersection(const CellSet& A, const CellSet& B);

// Hit fraction of n Haar samples with a Wilson 95% interval.
MeasureEstimate mc_measure(const SetRegion& region, std::size_t n, std::uint64_t seed);
MeasureEstimate wilson_interval(std::size_t hits, std::size_t n);

// Binary format: "HCST", u16 version, u64 net hash, u32 cells, u8 flags, then
// run-length encoded inner, outer and (flag bit 1) nominal bitsets.
void save_cellset(const CellSet& A, const std::string& path);
std::vector<std::uint8_t> encode_cellset(const CellSet& A);
// Throws NetMismatch when the file was written for another net.
CellSet load_cellset(const std::string& path, const NetPtr& net);
CellSet decode_cellset(const std::vector<std::uint8_t>& bytes, const NetPtr& net);

// Runs [first, last] of consecutive set bits.
std::vector<std::pair<std::size_t, std::size_t>> bit_runs(const CellBits& b);

}  // namespace haarlab
