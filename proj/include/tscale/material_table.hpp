#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "tscale/slab_mc.hpp"

namespace tscale {

// Strictly increasing coefficient axis starting at 0, cm^-1.
struct CoefficientGrid {
    std::vector<double> values;

    // The 41-value production axis:
    // 0,0.05,...,0.8 | 0.9,...,1.4 | 1.6,...,2 | 4,...,10 | 20,50,75,100,200,300,600,850,1000,1250,2500
    static CoefficientGrid paper_default();
    // The paper axis truncated at max_value (for reduced builds).
    static CoefficientGrid paper_truncated(double max_value);

    void validate() const;
    std::size_t size() const { return values.size(); }
    double max() const { return values.back(); }
    // Index of the cell containing x, i.e. largest i with values[i] <= x.
    std::size_t cell_of(double x) const;
};

enum class NodeStatus : std::uint8_t { pending = 0, ok = 1, failed = 2 };

struct TableMetadata {
    double thickness_cm = 0.4;
    double refractive_index = 1.3;
    std::uint64_t n_photons = 100000;
    std::uint64_t seed = 1;
    double backing_white_factor = 0.92;
    double detection_half_angle_deg = 5.0;
    std::uint32_t format_version = 1;
    std::string notes;  // free-form provenance (grid reading, irradiance idealization)
};

// Simulated measurement triples over a (sigma_a, sigma_s) grid with bilinear
// interpolation in raw coefficients. Rows iterate sigma_a, columns sigma_s.
class MaterialTable {
public:
    MaterialTable() = default;
    MaterialTable(CoefficientGrid axis_a, CoefficientGrid axis_s, TableMetadata meta);

    const CoefficientGrid& axis_a() const { return axis_a_; }
    const CoefficientGrid& axis_s() const { return axis_s_; }
    const TableMetadata& metadata() const { return meta_; }
    TableMetadata& metadata() { return meta_; }

    std::size_t node_count() const { return triples_.size(); }
    std::size_t index_of(std::size_t ia, std::size_t is) const {
        return ia * axis_s_.size() + is;
    }
    const MeasurementTriple& node(std::size_t ia, std::size_t is) const {
        return triples_[index_of(ia, is)];
    }
    NodeStatus status(std::size_t ia, std::size_t is) const {
        return status_[index_of(ia, is)];
    }
    void set_node(std::size_t ia, std::size_t is, const MeasurementTriple& t, NodeStatus st);

    bool complete() const;
    std::size_t count(NodeStatus st) const;

    // Componentwise bilinear interpolation in raw coefficients; exact at nodes.
    // Out-of-range queries and incomplete tables are errors.
    MeasurementTriple interpolate(double sigma_a, double sigma_s) const;

    void export_csv(std::ostream& out) const;

private:
    CoefficientGrid axis_a_, axis_s_;
    TableMetadata meta_;
    std::vector<MeasurementTriple> triples_;
    std::vector<NodeStatus> status_;

    friend void save_table(const MaterialTable&, const std::string&);
    friend MaterialTable load_table(const std::string&);
};

struct BuildOptions {
    TripleConfig sim;
    int n_threads = 1;
    // When set, the table is checkpointed here after every completed row so an
    // interrupted build can resume.
    std::string checkpoint_path;
    std::function<void(std::size_t done, std::size_t total)> progress;
};

// Simulates every pending node. An existing (partial) table can be passed in
// to resume; node simulation failures flag the node and the build continues.
MaterialTable build_table(const CoefficientGrid& axis_a, const CoefficientGrid& axis_s,
                          const TableMetadata& meta, const BuildOptions& opts,
                          const MaterialTable* resume_from = nullptr);

// Self-describing little-endian binary container (.mtab) with a CRC-32 trailer.
void save_table(const MaterialTable& table, const std::string& path);
MaterialTable load_table(const std::string& path);

}  // namespace tscale
