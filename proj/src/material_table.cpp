#include "tscale/material_table.hpp"

#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "tscale/rng.hpp"

namespace tscale {

namespace {

void append_raw(std::string& buf, const void* p, std::size_t n) {
    buf.append(static_cast<const char*>(p), n);
}
void append_u32(std::string& buf, std::uint32_t v) { append_raw(buf, &v, 4); }
void append_u64(std::string& buf, std::uint64_t v) { append_raw(buf, &v, 8); }
void append_f64(std::string& buf, double v) { append_raw(buf, &v, 8); }

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    void read_raw(void* p, std::size_t n) {
        if (pos + n > buf.size()) throw std::runtime_error("mtab: truncated file");
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    }
    std::uint32_t u32() { std::uint32_t v; read_raw(&v, 4); return v; }
    std::uint64_t u64() { std::uint64_t v; read_raw(&v, 8); return v; }
    double f64() { double v; read_raw(&v, 8); return v; }
};

constexpr char kMagic[4] = {'M', 'T', 'A', 'B'};
constexpr std::uint32_t kFormatVersion = 1;

}  // namespace

CoefficientGrid CoefficientGrid::paper_default() {
    CoefficientGrid g;
    for (int i = 0; i <= 16; ++i) g.values.push_back(i * 0.05);           // 0 .. 0.8
    for (int i = 9; i <= 14; ++i) g.values.push_back(i * 0.1);            // 0.9 .. 1.4
    for (int i = 8; i <= 10; ++i) g.values.push_back(i * 0.2);            // 1.6 .. 2
    for (int i = 2; i <= 5; ++i) g.values.push_back(i * 2.0);             // 4 .. 10
    for (double v : {20.0, 50.0, 75.0, 100.0, 200.0, 300.0, 600.0, 850.0, 1000.0, 1250.0, 2500.0})
        g.values.push_back(v);
    g.validate();
    return g;
}

CoefficientGrid CoefficientGrid::paper_truncated(double max_value) {
    CoefficientGrid g = paper_default();
    std::erase_if(g.values, [max_value](double v) { return v > max_value; });
    g.validate();
    return g;
}

void CoefficientGrid::validate() const {
    if (values.size() < 2) throw std::invalid_argument("CoefficientGrid: need >= 2 values");
    if (values.front() != 0.0) throw std::invalid_argument("CoefficientGrid: first value must be 0");
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] <= values[i - 1])
            throw std::invalid_argument("CoefficientGrid: values must be strictly increasing");
}

std::size_t CoefficientGrid::cell_of(double x) const {
    const auto it = std::upper_bound(values.begin(), values.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - values.begin());
    if (i == 0) return 0;
    return std::min(i - 1, values.size() - 2);
}

MaterialTable::MaterialTable(CoefficientGrid axis_a, CoefficientGrid axis_s, TableMetadata meta)
    : axis_a_(std::move(axis_a)), axis_s_(std::move(axis_s)), meta_(std::move(meta)) {
    axis_a_.validate();
    axis_s_.validate();
    triples_.resize(axis_a_.size() * axis_s_.size());
    status_.assign(triples_.size(), NodeStatus::pending);
}

void MaterialTable::set_node(std::size_t ia, std::size_t is, const MeasurementTriple& t,
                             NodeStatus st) {
    const std::size_t i = index_of(ia, is);
    triples_[i] = t;
    status_[i] = st;
}

bool MaterialTable::complete() const {
    return std::all_of(status_.begin(), status_.end(),
                       [](NodeStatus s) { return s == NodeStatus::ok; });
}

std::size_t MaterialTable::count(NodeStatus st) const {
    return static_cast<std::size_t>(std::count(status_.begin(), status_.end(), st));
}

MeasurementTriple MaterialTable::interpolate(double sigma_a, double sigma_s) const {
    if (!complete()) throw std::logic_error("MaterialTable: interpolation on incomplete table");
    if (sigma_a < 0.0 || sigma_a > axis_a_.max() || sigma_s < 0.0 || sigma_s > axis_s_.max())
        throw std::out_of_range("MaterialTable: query outside grid range");
    const std::size_t ia = axis_a_.cell_of(sigma_a);
    const std::size_t is = axis_s_.cell_of(sigma_s);
    const double a0 = axis_a_.values[ia], a1 = axis_a_.values[ia + 1];
    const double s0 = axis_s_.values[is], s1 = axis_s_.values[is + 1];
    const double u = (sigma_a - a0) / (a1 - a0);
    const double v = (sigma_s - s0) / (s1 - s0);
    const MeasurementTriple& t00 = node(ia, is);
    const MeasurementTriple& t10 = node(ia + 1, is);
    const MeasurementTriple& t01 = node(ia, is + 1);
    const MeasurementTriple& t11 = node(ia + 1, is + 1);
    auto lerp2 = [&](double c00, double c10, double c01, double c11) {
        return (1.0 - u) * ((1.0 - v) * c00 + v * c01) + u * ((1.0 - v) * c10 + v * c11);
    };
    return {lerp2(t00.L_R, t10.L_R, t01.L_R, t11.L_R),
            lerp2(t00.L_T, t10.L_T, t01.L_T, t11.L_T),
            lerp2(t00.dL01, t10.dL01, t01.dL01, t11.dL01)};
}

void MaterialTable::export_csv(std::ostream& out) const {
    out << "sigma_a,sigma_s,L_R,L_T,dL01\n";
    out.precision(17);
    for (std::size_t ia = 0; ia < axis_a_.size(); ++ia)
        for (std::size_t is = 0; is < axis_s_.size(); ++is) {
            const auto& t = node(ia, is);
            out << axis_a_.values[ia] << ',' << axis_s_.values[is] << ',' << t.L_R << ','
                << t.L_T << ',' << t.dL01 << '\n';
        }
}

MaterialTable build_table(const CoefficientGrid& axis_a, const CoefficientGrid& axis_s,
                          const TableMetadata& meta, const BuildOptions& opts,
                          const MaterialTable* resume_from) {
    MaterialTable table(axis_a, axis_s, meta);
    if (resume_from) {
        if (resume_from->axis_a().values != axis_a.values ||
            resume_from->axis_s().values != axis_s.values)
            throw std::invalid_argument("build_table: resume table has a different grid");
        table = *resume_from;
    }

    const std::size_t na = axis_a.size(), ns = axis_s.size();
    const std::size_t total = na * ns;
    std::atomic<std::size_t> done{table.count(NodeStatus::ok)};

    TripleConfig sim = opts.sim;
    sim.detection_half_angle_deg = meta.detection_half_angle_deg;
    sim.backing_white_factor = meta.backing_white_factor;
    sim.n_photons = meta.n_photons;
    sim.n_threads = 1;  // parallelism is across nodes

    auto simulate_node = [&](std::size_t ia, std::size_t is) {
        if (table.status(ia, is) == NodeStatus::ok) return;
        SlabSample sample;
        sample.material = {axis_a.values[ia], axis_s.values[is]};
        sample.thickness = meta.thickness_cm;
        sample.refractive_index = meta.refractive_index;
        TripleConfig node_sim = sim;
        // Stable per-node seed so rebuilding any subset is reproducible.
        node_sim.seed = Rng::substream(meta.seed, table.index_of(ia, is));
        try {
            const TripleEstimate est = simulate_triple(sample, node_sim);
            table.set_node(ia, is, est.triple, NodeStatus::ok);
        } catch (const std::exception&) {
            table.set_node(ia, is, {}, NodeStatus::failed);
        }
        if (opts.progress) opts.progress(done.fetch_add(1) + 1, total);
    };

    const int n_threads = opts.n_threads > 0
                              ? opts.n_threads
                              : static_cast<int>(std::thread::hardware_concurrency());
    for (std::size_t ia = 0; ia < na; ++ia) {
        if (n_threads <= 1) {
            for (std::size_t is = 0; is < ns; ++is) simulate_node(ia, is);
        } else {
            std::atomic<std::size_t> next{0};
            std::vector<std::thread> pool;
            for (int t = 0; t < n_threads; ++t)
                pool.emplace_back([&] {
                    for (std::size_t is; (is = next.fetch_add(1)) < ns;) simulate_node(ia, is);
                });
            for (auto& th : pool) th.join();
        }
        if (!opts.checkpoint_path.empty()) save_table(table, opts.checkpoint_path);
    }
    return table;
}

void save_table(const MaterialTable& table, const std::string& path) {
    std::string buf;
    append_raw(buf, kMagic, 4);
    append_u32(buf, kFormatVersion);
    append_u32(buf, static_cast<std::uint32_t>(table.axis_a_.size()));
    append_u32(buf, static_cast<std::uint32_t>(table.axis_s_.size()));
    const auto& m = table.meta_;
    append_f64(buf, m.thickness_cm);
    append_f64(buf, m.refractive_index);
    append_u64(buf, m.n_photons);
    append_u64(buf, m.seed);
    append_f64(buf, m.backing_white_factor);
    append_f64(buf, m.detection_half_angle_deg);
    append_u32(buf, static_cast<std::uint32_t>(m.notes.size()));
    buf += m.notes;
    for (double v : table.axis_a_.values) append_f64(buf, v);
    for (double v : table.axis_s_.values) append_f64(buf, v);
    for (std::size_t i = 0; i < table.triples_.size(); ++i) {
        append_f64(buf, table.triples_[i].L_R);
        append_f64(buf, table.triples_[i].L_T);
        append_f64(buf, table.triples_[i].dL01);
        buf.push_back(static_cast<char>(table.status_[i]));
    }
    const std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
    append_u32(buf, crc);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_table: cannot open " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("save_table: write failed for " + path);
}

MaterialTable load_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_table: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string buf = ss.str();
    if (buf.size() < 16) throw std::runtime_error("load_table: truncated file " + path);

    const std::uint32_t stored_crc =
        *reinterpret_cast<const std::uint32_t*>(buf.data() + buf.size() - 4);
    const std::uint32_t crc = static_cast<std::uint32_t>(crc32(
        0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size() - 4)));
    if (crc != stored_crc) throw std::runtime_error("load_table: checksum failure in " + path);

    Reader r{buf};
    char magic[4];
    r.read_raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("load_table: not a .mtab file: " + path);
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion)
        throw std::runtime_error("load_table: unsupported format version " +
                                 std::to_string(version) + " in " + path);
    const std::uint32_t na = r.u32();
    const std::uint32_t ns = r.u32();
    TableMetadata meta;
    meta.format_version = version;
    meta.thickness_cm = r.f64();
    meta.refractive_index = r.f64();
    meta.n_photons = r.u64();
    meta.seed = r.u64();
    meta.backing_white_factor = r.f64();
    meta.detection_half_angle_deg = r.f64();
    const std::uint32_t notes_len = r.u32();
    if (r.pos + notes_len > buf.size()) throw std::runtime_error("load_table: truncated file");
    meta.notes.assign(buf, r.pos, notes_len);
    r.pos += notes_len;

    CoefficientGrid ga, gs;
    ga.values.resize(na);
    gs.values.resize(ns);
    for (auto& v : ga.values) v = r.f64();
    for (auto& v : gs.values) v = r.f64();

    MaterialTable table(std::move(ga), std::move(gs), std::move(meta));
    for (std::size_t i = 0; i < table.triples_.size(); ++i) {
        table.triples_[i].L_R = r.f64();
        table.triples_[i].L_T = r.f64();
        table.triples_[i].dL01 = r.f64();
        char st;
        r.read_raw(&st, 1);
        table.status_[i] = static_cast<NodeStatus>(st);
    }
    if (r.pos != buf.size() - 4) throw std::runtime_error("load_table: trailing bytes in " + path);
    return table;
}

}  // namespace tscale
