#pragma once

#include <iosfwd>
#include <string>

#include "tscale/alpha_model.hpp"
#include "tscale/slab_mc.hpp"

namespace tscale {

struct CliConfig {
    std::string table_path;  // empty: take the TSCALE_TABLE environment variable
    std::string output_dir = ".";
    AlphaParams params;
    TripleConfig sim;
    double thickness_cm = 0.4;
    double refractive_index = 1.3;

    void validate() const;
};

// Plain-text key=value file. Recognized keys: table, output_dir, p, q, c,
// photons, seed, thickness_cm, n, detection_half_angle_deg,
// backing_white_factor, threads. Unknown and duplicate keys are errors;
// '#' starts a comment.
CliConfig parse_config(std::istream& in, const std::string& source_name = "<stream>");
CliConfig parse_config_file(const std::string& path);

}  // namespace tscale
