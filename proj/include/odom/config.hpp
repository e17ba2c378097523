#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace odom {

/// One resolved run. Flag values override file values override defaults.
struct RunConfig {
    std::string command;

    // inputs
    std::string dataset;  // directory of KITTI .bin scans
    std::string poses;    // ground-truth pose file (train)
    std::string world;    // simulator world config (simulate)
    std::string bundle;   // model bundle directory (infer)
    std::string gt;       // pose files (eval)
    std::string est;

    // encoding
    int grid_rows = 64;
    double grid_step_deg = 1.0;
    int cls_rows = 64;
    double cls_step_deg = 0.2;
    double height_norm = 3.0;

    // models
    int previous_frames = 5;     // N
    std::string target = "none"; // none|translation|rotation|both
    std::string axes;            // classifier axes, subset of "xyz"
    int k_x = 13, k_y = 56, k_z = 13;
    int window = 3;              // W
    std::vector<int> channels = {16, 32, 64};

    // training
    int iterations = 1000;
    int batch = 8;
    double lr = 1e-3;
    double momentum = 0.9;
    int lr_step = 0;
    double lr_decay = 0.5;
    uint64_t seed = 1;
    std::string precision = "f32";

    // eval
    int step = 10;
    std::string splice = "none";  // none|translation|rotation
    int frames = 0;               // simulate: 0 = value from the world file

    // run
    std::string out = "out";
    int threads = 0;  // 0 = all cores
};

/// Parses a key = value config file for the given command. Unknown keys and
/// keys that do not apply to the command are rejected.
RunConfig load_run_config(const std::string& path, const std::string& command);

/// Field validation; throws UsageError naming the offending field.
void validate_config(const RunConfig& cfg);

/// Writes the fully resolved configuration (the canonical record of a run).
void write_config_copy(const RunConfig& cfg, const std::string& path);

}  // namespace odom
