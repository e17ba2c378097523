#include "odom/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "odom/error.hpp"

namespace odom {

namespace {

const std::set<std::string> kCommonKeys = {"out", "seed", "threads"};

std::set<std::string> keys_for(const std::string& command) {
    std::set<std::string> keys = kCommonKeys;
    if (command == "simulate") {
        keys.insert({"world", "frames"});
    } else if (command == "encode") {
        keys.insert({"dataset", "grid_rows", "grid_step_deg", "H"});
    } else if (command == "train") {
        keys.insert({"dataset", "poses", "grid_rows", "grid_step_deg", "cls_rows", "cls_step_deg",
                     "H", "N", "target", "axes", "K_x", "K_y", "K_z", "W", "channels", "iterations",
                     "batch", "lr", "momentum", "lr_step", "lr_decay", "precision"});
    } else if (command == "infer") {
        keys.insert({"dataset", "bundle"});
    } else if (command == "eval") {
        keys.insert({"gt", "est", "step", "splice"});
    } else {
        throw UsageError("unknown command '" + command + "'");
    }
    return keys;
}

std::vector<int> parse_int_list(const std::string& value, const std::string& key) {
    std::istringstream in(value);
    std::vector<int> out;
    int v;
    while (in >> v) out.push_back(v);
    if (out.empty() || !in.eof()) throw UsageError("config: bad integer list for '" + key + "'");
    return out;
}

}  // namespace

RunConfig load_run_config(const std::string& path, const std::string& command) {
    const std::set<std::string> allowed = keys_for(command);
    std::ifstream in(path);
    if (!in) throw UsageError("config: cannot open " + path);

    RunConfig cfg;
    cfg.command = command;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t"));
        trimmed.erase(trimmed.find_last_not_of(" \t") + 1);
        if (trimmed.empty()) continue;
        const size_t eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw UsageError("config: " + path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trimmed.substr(0, eq);
        std::string value = trimmed.substr(eq + 1);
        key.erase(key.find_last_not_of(" \t") + 1);
        value.erase(0, value.find_first_not_of(" \t"));
        if (!allowed.count(key)) {
            throw UsageError("config: " + path + ":" + std::to_string(lineno) + ": key '" + key +
                             "' is unknown for command '" + command + "'");
        }
        try {
            if (key == "out") cfg.out = value;
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "threads") cfg.threads = std::stoi(value);
            else if (key == "world") cfg.world = value;
            else if (key == "frames") cfg.frames = std::stoi(value);
            else if (key == "dataset") cfg.dataset = value;
            else if (key == "poses") cfg.poses = value;
            else if (key == "bundle") cfg.bundle = value;
            else if (key == "gt") cfg.gt = value;
            else if (key == "est") cfg.est = value;
            else if (key == "grid_rows") cfg.grid_rows = std::stoi(value);
            else if (key == "grid_step_deg") cfg.grid_step_deg = std::stod(value);
            else if (key == "cls_rows") cfg.cls_rows = std::stoi(value);
            else if (key == "cls_step_deg") cfg.cls_step_deg = std::stod(value);
            else if (key == "H") cfg.height_norm = std::stod(value);
            else if (key == "N") cfg.previous_frames = std::stoi(value);
            else if (key == "target") cfg.target = value;
            else if (key == "axes") cfg.axes = value;
            else if (key == "K_x") cfg.k_x = std::stoi(value);
            else if (key == "K_y") cfg.k_y = std::stoi(value);
            else if (key == "K_z") cfg.k_z = std::stoi(value);
            else if (key == "W") cfg.window = std::stoi(value);
            else if (key == "channels") cfg.channels = parse_int_list(value, key);
            else if (key == "iterations") cfg.iterations = std::stoi(value);
            else if (key == "batch") cfg.batch = std::stoi(value);
            else if (key == "lr") cfg.lr = std::stod(value);
            else if (key == "momentum") cfg.momentum = std::stod(value);
            else if (key == "lr_step") cfg.lr_step = std::stoi(value);
            else if (key == "lr_decay") cfg.lr_decay = std::stod(value);
            else if (key == "precision") cfg.precision = value;
            else if (key == "step") cfg.step = std::stoi(value);
            else if (key == "splice") cfg.splice = value;
        } catch (const std::invalid_argument&) {
            throw UsageError("config: " + path + ":" + std::to_string(lineno) + ": bad value for '" + key + "'");
        } catch (const std::out_of_range&) {
            throw UsageError("config: " + path + ":" + std::to_string(lineno) + ": value out of range for '" + key + "'");
        }
    }
    return cfg;
}

void validate_config(const RunConfig& cfg) {
    auto fail = [](const std::string& why) { throw UsageError("config: " + why); };
    if (cfg.threads < 0) fail("threads must be >= 0");
    if (cfg.out.empty()) fail("out directory must not be empty");

    if (cfg.command == "simulate") {
        if (cfg.world.empty()) fail("simulate needs 'world'");
        if (cfg.frames < 0) fail("frames must be >= 0");
        return;
    }
    if (cfg.command == "encode") {
        if (cfg.dataset.empty()) fail("encode needs 'dataset'");
        if (cfg.grid_rows < 1) fail("grid_rows must be >= 1");
        if (cfg.grid_step_deg <= 0) fail("grid_step_deg must be positive");
        return;
    }
    if (cfg.command == "train") {
        if (cfg.dataset.empty()) fail("train needs 'dataset'");
        if (cfg.poses.empty()) fail("train needs 'poses'");
        const bool regression = cfg.target != "none";
        if (regression && cfg.target != "translation" && cfg.target != "rotation" && cfg.target != "both") {
            fail("target must be none, translation, rotation or both");
        }
        if (!regression && cfg.axes.empty()) fail("train needs a target and/or classifier axes");
        for (char a : cfg.axes) {
            if (a != 'x' && a != 'y' && a != 'z') fail("axes must be a subset of xyz");
        }
        if (std::set<char>(cfg.axes.begin(), cfg.axes.end()).size() != cfg.axes.size()) {
            fail("axes must not repeat");
        }
        if (cfg.previous_frames < 1 || cfg.previous_frames > 7) fail("N must be in [1, 7]");
        if (cfg.window < 1) fail("W must be >= 1");
        if (cfg.channels.size() != 3) fail("channels needs exactly 3 values");
        for (int c : cfg.channels) {
            if (c < 1) fail("channels must be positive");
        }
        if (cfg.iterations < 0) fail("iterations must be >= 0");
        if (cfg.batch < 1) fail("batch must be >= 1");
        if (cfg.lr < 0 || !(cfg.momentum >= 0 && cfg.momentum < 1)) fail("bad lr/momentum");
        if (cfg.lr_step < 0 || cfg.lr_decay <= 0) fail("bad lr schedule");
        if (cfg.precision != "f32" && cfg.precision != "f64") fail("precision must be f32 or f64");
        if (cfg.k_x < 2 || cfg.k_y < 2 || cfg.k_z < 2) fail("class counts must be >= 2");
        return;
    }
    if (cfg.command == "infer") {
        if (cfg.dataset.empty()) fail("infer needs 'dataset'");
        if (cfg.bundle.empty()) fail("infer needs 'bundle'");
        return;
    }
    if (cfg.command == "eval") {
        if (cfg.gt.empty() || cfg.est.empty()) fail("eval needs 'gt' and 'est'");
        if (cfg.step < 1) fail("step must be >= 1");
        if (cfg.splice != "none" && cfg.splice != "translation" && cfg.splice != "rotation") {
            fail("splice must be none, translation or rotation");
        }
        return;
    }
    fail("unknown command '" + cfg.command + "'");
}

void write_config_copy(const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write config copy to " + path);
    out << "# resolved configuration for '" << cfg.command << "'\n";
    out << "out = " << cfg.out << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "threads = " << cfg.threads << "\n";
    if (cfg.command == "simulate") {
        out << "world = " << cfg.world << "\n";
        out << "frames = " << cfg.frames << "\n";
    } else if (cfg.command == "encode") {
        out << "dataset = " << cfg.dataset << "\n";
        out << "grid_rows = " << cfg.grid_rows << "\n";
        out << "grid_step_deg = " << cfg.grid_step_deg << "\n";
        out << "H = " << cfg.height_norm << "\n";
    } else if (cfg.command == "train") {
        out << "dataset = " << cfg.dataset << "\n";
        out << "poses = " << cfg.poses << "\n";
        out << "target = " << cfg.target << "\n";
        out << "axes = " << cfg.axes << "\n";
        out << "N = " << cfg.previous_frames << "\n";
        out << "W = " << cfg.window << "\n";
        out << "H = " << cfg.height_norm << "\n";
        out << "grid_rows = " << cfg.grid_rows << "\n";
        out << "grid_step_deg = " << cfg.grid_step_deg << "\n";
        out << "cls_rows = " << cfg.cls_rows << "\n";
        out << "cls_step_deg = " << cfg.cls_step_deg << "\n";
        out << "K_x = " << cfg.k_x << "\nK_y = " << cfg.k_y << "\nK_z = " << cfg.k_z << "\n";
        out << "channels = " << cfg.channels[0] << " " << cfg.channels[1] << " " << cfg.channels[2] << "\n";
        out << "iterations = " << cfg.iterations << "\n";
        out << "batch = " << cfg.batch << "\n";
        out << "lr = " << cfg.lr << "\n";
        out << "momentum = " << cfg.momentum << "\n";
        out << "lr_step = " << cfg.lr_step << "\n";
        out << "lr_decay = " << cfg.lr_decay << "\n";
        out << "precision = " << cfg.precision << "\n";
    } else if (cfg.command == "infer") {
        out << "dataset = " << cfg.dataset << "\n";
        out << "bundle = " << cfg.bundle << "\n";
    } else if (cfg.command == "eval") {
        out << "gt = " << cfg.gt << "\n";
        out << "est = " << cfg.est << "\n";
        out << "step = " << cfg.step << "\n";
        out << "splice = " << cfg.splice << "\n";
    }
}

}  // namespace odom
