#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpw/trainer.hpp"
#include "dpw/transport.hpp"

namespace dpw {

// Flat `key = value` config with [section] headers; a key inside a section is
// addressed as "section.key". Unknown keys are hard errors at parse time.
class FlatConfig {
public:
    static FlatConfig parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("config: cannot open " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_text(ss.str());
    }

    static FlatConfig parse_text(const std::string& text) {
        FlatConfig c;
        c.raw_text_ = text;
        std::stringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[' && line.back() == ']') {
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("config: line " + std::to_string(lineno) +
                                         ": expected key = value");
            std::string key = trim(line.substr(0, eq));
            std::string val = trim(line.substr(eq + 1));
            if (key.empty()) throw std::runtime_error("config: empty key at line " + std::to_string(lineno));
            if (!section.empty()) key = section + "." + key;
            if (c.values_.count(key))
                throw std::runtime_error("config: duplicate key " + key);
            c.values_[key] = val;
        }
        return c;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& def) {
        used_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? def : it->second;
    }
    long get_long(const std::string& key, long def) {
        used_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? def : std::stol(it->second);
    }
    std::uint64_t get_u64(const std::string& key, std::uint64_t def) {
        used_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? def : std::stoull(it->second);
    }
    double get_double(const std::string& key, double def) {
        used_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? def : std::stod(it->second);
    }
    bool get_bool(const std::string& key, bool def) {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return def;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw std::runtime_error("config: boolean expected for " + key);
    }
    std::vector<long> get_long_list(const std::string& key, const std::vector<long>& def) {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return def;
        std::vector<long> out;
        std::stringstream ss(it->second);
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(std::stol(trim(tok)));
        return out;
    }

    // call after reading every known key; any leftover is a hard error
    void reject_unknown_keys() const {
        for (const auto& [k, v] : values_)
            if (!used_.count(k)) throw std::runtime_error("config: unknown key " + k);
    }

    const std::string& raw_text() const { return raw_text_; }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> values_;
    std::set<std::string> used_;
    std::string raw_text_;
};

// Full experiment description: measures, sweep grid, training and transport
// settings. Every field has a recorded default; parse is lossless.
struct ExperimentConfig {
    std::string example = "1d";  // "1d" or "2d"
    std::vector<long> n_list = {100, 193, 373, 720, 1389, 2683, 5179, 10000};
    int repeats = 5;
    long validation_size = 100000;
    std::vector<int> arch;  // empty = [d,256,256,d]
    TrainConfig train;
    std::string transport_method = "exact";  // exact | minibatch | subsample
    int subsample_k = 10;
    Eigen::Index subsample_m = 1024;
    std::string out_dir = "out";
    std::uint64_t master_seed = 1;
    int workers = 1;

    static ExperimentConfig from_config(FlatConfig& c) {
        ExperimentConfig e;
        e.example = c.get_string("example", e.example);
        if (e.example != "1d" && e.example != "2d")
            throw std::runtime_error("config: example must be 1d or 2d");
        e.n_list = c.get_long_list("n_list", e.n_list);
        e.repeats = static_cast<int>(c.get_long("repeats", e.repeats));
        e.validation_size = c.get_long("validation_size", e.validation_size);
        {
            auto a = c.get_long_list("arch", {});
            for (long v : a) e.arch.push_back(static_cast<int>(v));
        }
        e.train.max_iters = c.get_long("train.max_iters", e.train.max_iters);
        e.train.batch = c.get_long("train.batch", 0);
        e.train.lr = c.get_double("train.lr", e.train.lr);
        e.train.steplr_step_size = c.get_long("train.steplr_step_size", e.train.steplr_step_size);
        e.train.steplr_decay = c.get_double("train.steplr_decay", e.train.steplr_decay);
        e.train.patience = c.get_long("train.patience", e.train.patience);
        e.train.assignment_refresh_every =
            c.get_long("train.assignment_refresh_every", e.train.assignment_refresh_every);
        e.train.global_assignment = c.get_bool("train.global_assignment", false);
        e.transport_method = c.get_string("transport.method", e.transport_method);
        if (e.transport_method != "exact" && e.transport_method != "minibatch" &&
            e.transport_method != "subsample")
            throw std::runtime_error("config: transport.method must be exact|minibatch|subsample");
        e.subsample_k = static_cast<int>(c.get_long("transport.k", e.subsample_k));
        e.subsample_m = c.get_long("transport.m", e.subsample_m);
        e.out_dir = c.get_string("out", e.out_dir);
        e.master_seed = c.get_u64("seed", e.master_seed);
        e.workers = static_cast<int>(c.get_long("workers", e.workers));
        c.reject_unknown_keys();
        return e;
    }

    std::vector<int> effective_arch() const {
        if (!arch.empty()) return arch;
        const int d = (example == "2d") ? 2 : 1;
        return {d, 256, 256, d};
    }

    W2Options validation_options(std::uint64_t seed) const {
        W2Options o;
        if (transport_method == "subsample") {
            o.method = W2Options::Method::SubsampleAvg;
            o.k = subsample_k;
            o.m = subsample_m;
        } else if (transport_method == "minibatch") {
            o.method = W2Options::Method::MinibatchRefine;
        } else {
            o.method = W2Options::Method::ExactLp;
        }
        o.seed = seed;
        return o;
    }

    // config echo with defaults filled in, used in manifests
    std::string echo() const {
        std::stringstream s;
        s << "example = " << example << "\nn_list = ";
        for (std::size_t i = 0; i < n_list.size(); ++i) s << (i ? "," : "") << n_list[i];
        s << "\nrepeats = " << repeats << "\nvalidation_size = " << validation_size << "\narch = ";
        const auto a = effective_arch();
        for (std::size_t i = 0; i < a.size(); ++i) s << (i ? "," : "") << a[i];
        s << "\nseed = " << master_seed << "\nworkers = " << workers << "\nout = " << out_dir
          << "\n\n[train]\nmax_iters = " << train.max_iters << "\nbatch = " << train.batch
          << "\nlr = " << train.lr << "\nsteplr_step_size = " << train.steplr_step_size
          << "\nsteplr_decay = " << train.steplr_decay << "\npatience = " << train.patience
          << "\nassignment_refresh_every = " << train.assignment_refresh_every
          << "\nglobal_assignment = " << (train.global_assignment ? "true" : "false")
          << "\n\n[transport]\nmethod = " << transport_method << "\nk = " << subsample_k
          << "\nm = " << subsample_m << "\n";
        return s.str();
    }
};

}  // namespace dpw
