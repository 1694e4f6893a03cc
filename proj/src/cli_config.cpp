#include "tscale/cli_config.hpp"

#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tscale {

void CliConfig::validate() const {
    params.validate();
    if (sim.n_photons == 0) throw std::domain_error("config: photons must be > 0");
    if (sim.detection_half_angle_deg <= 0.0 || sim.detection_half_angle_deg >= 90.0)
        throw std::domain_error("config: detection_half_angle_deg must be in (0,90)");
    if (sim.backing_white_factor < 0.0 || sim.backing_white_factor > 1.0)
        throw std::domain_error("config: backing_white_factor must be in [0,1]");
    if (thickness_cm <= 0.0) throw std::domain_error("config: thickness_cm must be > 0");
    if (refractive_index < 1.0) throw std::domain_error("config: n must be >= 1");
}

CliConfig parse_config(std::istream& in, const std::string& source_name) {
    CliConfig cfg;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t");
        line = line.substr(first, last - first + 1);

        const std::string where = source_name + ":" + std::to_string(line_no);
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(where + ": expected key=value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t");
            return s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::runtime_error(where + ": empty key or value");
        if (!seen.insert(key).second)
            throw std::runtime_error(where + ": duplicate key '" + key + "'");

        auto num = [&] {
            try {
                std::size_t pos;
                const double v = std::stod(value, &pos);
                if (pos != value.size()) throw std::invalid_argument("");
                return v;
            } catch (const std::exception&) {
                throw std::runtime_error(where + ": '" + key + "' needs a numeric value");
            }
        };
        auto uint = [&] {
            try {
                std::size_t pos;
                const unsigned long long v = std::stoull(value, &pos);
                if (pos != value.size()) throw std::invalid_argument("");
                return static_cast<std::uint64_t>(v);
            } catch (const std::exception&) {
                throw std::runtime_error(where + ": '" + key + "' needs a non-negative integer");
            }
        };

        if (key == "table") cfg.table_path = value;
        else if (key == "output_dir") cfg.output_dir = value;
        else if (key == "p") cfg.params.p = num();
        else if (key == "q") cfg.params.q = num();
        else if (key == "c") cfg.params.c = num();
        else if (key == "photons") cfg.sim.n_photons = uint();
        else if (key == "seed") cfg.sim.seed = uint();
        else if (key == "thickness_cm") cfg.thickness_cm = num();
        else if (key == "n") cfg.refractive_index = num();
        else if (key == "detection_half_angle_deg") cfg.sim.detection_half_angle_deg = num();
        else if (key == "backing_white_factor") cfg.sim.backing_white_factor = num();
        else if (key == "threads") cfg.sim.n_threads = static_cast<int>(uint());
        else throw std::runtime_error(where + ": unknown key '" + key + "'");
    }
    return cfg;
}

CliConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return parse_config(in, path);
}

}  // namespace tscale
