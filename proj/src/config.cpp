#include "fedsim/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace fedsim {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) {
        return "";
    }
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream stream(s);
    std::string token;
    while (stream >> token) {
        out.push_back(token);
    }
    return out;
}

[[noreturn]] void parse_fail(int line, const std::string& what) {
    std::ostringstream msg;
    msg << "line " << line << ": " << what;
    throw ParseError(msg.str());
}

double parse_real(const std::string& value, int line, const std::string& key) {
    double out = 0.0;
    const char* begin = value.data();
    const char* end = begin + value.size();
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc{} || ptr != end) {
        parse_fail(line, "invalid real '" + value + "' for key '" + key + "'");
    }
    return out;
}

long long parse_integer(const std::string& value, int line, const std::string& key) {
    long long out = 0;
    const char* begin = value.data();
    const char* end = begin + value.size();
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc{} || ptr != end) {
        parse_fail(line, "invalid integer '" + value + "' for key '" + key + "'");
    }
    return out;
}

std::uint64_t parse_u64(const std::string& value, int line, const std::string& key) {
    std::uint64_t out = 0;
    const char* begin = value.data();
    const char* end = begin + value.size();
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc{} || ptr != end) {
        parse_fail(line, "invalid unsigned integer '" + value + "' for key '" + key + "'");
    }
    return out;
}

bool parse_bool(const std::string& value, int line, const std::string& key) {
    if (value == "true") {
        return true;
    }
    if (value == "false") {
        return false;
    }
    parse_fail(line, "invalid boolean '" + value + "' for key '" + key + "' (use true or false)");
}

std::vector<double> parse_real_list(const std::string& value, int line, const std::string& key) {
    std::vector<double> out;
    for (const std::string& token : split_ws(value)) {
        out.push_back(parse_real(token, line, key));
    }
    if (out.empty()) {
        parse_fail(line, "key '" + key + "' needs at least one value");
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& value, int line, const std::string& key) {
    std::vector<int> out;
    for (const std::string& token : split_ws(value)) {
        out.push_back(static_cast<int>(parse_integer(token, line, key)));
    }
    if (out.empty()) {
        parse_fail(line, "key '" + key + "' needs at least one value");
    }
    return out;
}

IntRange parse_int_range(const std::string& value, int line, const std::string& key) {
    const auto items = parse_int_list(value, line, key);
    if (items.size() != 2) {
        parse_fail(line, "key '" + key + "' needs exactly two integers (lo hi)");
    }
    return {items[0], items[1]};
}

RealRange parse_real_range(const std::string& value, int line, const std::string& key) {
    const auto items = parse_real_list(value, line, key);
    if (items.size() != 2) {
        parse_fail(line, "key '" + key + "' needs exactly two reals (lo hi)");
    }
    return {items[0], items[1]};
}

Method parse_method(const std::string& value, int line) {
    if (value == "fedavg") {
        return Method::FedAvg;
    }
    if (value == "fedacs") {
        return Method::FedAcs;
    }
    if (value == "ca-fedavg") {
        return Method::CaFedAvg;
    }
    if (value == "fedvarp") {
        return Method::FedVarp;
    }
    if (value == "fednova") {
        return Method::FedNova;
    }
    if (value == "optimal-sampling") {
        return Method::OptimalSampling;
    }
    std::ostringstream msg;
    msg << "unknown method '" << value << "' (line " << line << ")";
    throw ValidationError(msg.str());
}

struct RawEntry {
    std::string value;
    int line = 0;
};

using EntryMap = std::map<std::string, RawEntry>;

struct RawSection {
    std::string label;
    int line = 0;
    EntryMap entries;
};

std::string fmt_real(double v) {
    char buf[64];
    const auto result = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, result.ptr);
}

ExperimentConfig parse_text_impl(const std::string& text) {
    EntryMap globals;
    std::vector<RawSection> sections;
    bool in_section = false;

    std::istringstream stream(text);
    std::string raw_line;
    int line_number = 0;
    while (std::getline(stream, raw_line)) {
        ++line_number;
        const auto comment = raw_line.find('#');
        if (comment != std::string::npos) {
            raw_line.erase(comment);
        }
        const std::string line = trim(raw_line);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                parse_fail(line_number, "unterminated section header");
            }
            const std::string inner = trim(line.substr(1, line.size() - 2));
            const std::string prefix = "algorithm";
            if (inner.rfind(prefix, 0) != 0) {
                parse_fail(line_number, "section must be [algorithm LABEL]");
            }
            const std::string label = trim(inner.substr(prefix.size()));
            if (label.empty()) {
                parse_fail(line_number, "algorithm section needs a label");
            }
            sections.push_back({label, line_number, {}});
            in_section = true;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            parse_fail(line_number, "expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            parse_fail(line_number, "missing key before '='");
        }
        if (value.empty()) {
            parse_fail(line_number, "missing value for key '" + key + "'");
        }
        EntryMap& target = in_section ? sections.back().entries : globals;
        if (!target.emplace(key, RawEntry{value, line_number}).second) {
            std::ostringstream msg;
            msg << "duplicate key '" << key << "' (line " << line_number << ")";
            throw ValidationError(msg.str());
        }
    }

    const auto take = [&globals](const std::string& key) -> std::optional<RawEntry> {
        auto it = globals.find(key);
        if (it == globals.end()) {
            return std::nullopt;
        }
        RawEntry out = it->second;
        globals.erase(it);
        return out;
    };

    ExperimentConfig cfg;
    if (const auto e = take("clients")) {
        cfg.clients = static_cast<int>(parse_integer(e->value, e->line, "clients"));
    }
    if (const auto e = take("dim")) {
        cfg.dim = static_cast<int>(parse_integer(e->value, e->line, "dim"));
    }
    if (const auto e = take("rounds")) {
        cfg.rounds = parse_integer(e->value, e->line, "rounds");
    }
    if (const auto e = take("replicates")) {
        cfg.replicates = static_cast<int>(parse_integer(e->value, e->line, "replicates"));
    }
    if (const auto e = take("sample_count")) {
        cfg.sample_count = static_cast<int>(parse_integer(e->value, e->line, "sample_count"));
    }
    if (const auto e = take("eta")) {
        cfg.eta = parse_real(e->value, e->line, "eta");
    }
    if (const auto e = take("sigma_sq")) {
        cfg.sigma_sq = parse_real(e->value, e->line, "sigma_sq");
    }
    if (const auto e = take("seed")) {
        cfg.seed = parse_u64(e->value, e->line, "seed");
    }
    if (const auto e = take("calibrate")) {
        cfg.calibrate = parse_bool(e->value, e->line, "calibrate");
    }
    if (const auto e = take("record_every")) {
        cfg.record_every = parse_integer(e->value, e->line, "record_every");
    }
    if (const auto e = take("blowup_guard")) {
        cfg.blowup_guard = parse_real(e->value, e->line, "blowup_guard");
    }
    if (const auto e = take("jobs")) {
        cfg.jobs = static_cast<int>(parse_integer(e->value, e->line, "jobs"));
    }
    if (const auto e = take("weights")) {
        cfg.weights = parse_real_list(e->value, e->line, "weights");
    }

    std::string schedule_kind = "static";
    if (const auto e = take("schedule")) {
        schedule_kind = e->value;
    }
    const auto require = [&take, &schedule_kind](const std::string& key) -> RawEntry {
        auto e = take(key);
        if (!e) {
            throw ValidationError("schedule '" + schedule_kind + "' requires key '" + key + "'");
        }
        return *e;
    };
    if (schedule_kind == "static") {
        StaticSchedule s;
        if (const auto e = take("local_steps")) {
            s.local_steps = parse_int_list(e->value, e->line, "local_steps");
        }
        if (const auto e = take("failure_probs")) {
            s.failure_probs = parse_real_list(e->value, e->line, "failure_probs");
        }
        cfg.schedule = std::move(s);
    } else if (schedule_kind == "uniform") {
        UniformSchedule u;
        {
            const auto e = require("steps_range");
            u.steps = parse_int_range(e.value, e.line, "steps_range");
        }
        {
            const auto e = require("q_range");
            u.q = parse_real_range(e.value, e.line, "q_range");
        }
        if (const auto e = take("per_round")) {
            u.per_round = parse_bool(e->value, e->line, "per_round");
        }
        cfg.schedule = u;
    } else if (schedule_kind == "two-group") {
        TwoGroupSchedule t;
        {
            const auto e = require("group_split");
            t.group_split = static_cast<int>(parse_integer(e.value, e.line, "group_split"));
        }
        {
            const auto e = require("group1_steps_range");
            t.fast.steps = parse_int_range(e.value, e.line, "group1_steps_range");
        }
        {
            const auto e = require("group1_q_range");
            t.fast.q = parse_real_range(e.value, e.line, "group1_q_range");
        }
        {
            const auto e = require("group2_steps_range");
            t.slow.steps = parse_int_range(e.value, e.line, "group2_steps_range");
        }
        {
            const auto e = require("group2_q_range");
            t.slow.q = parse_real_range(e.value, e.line, "group2_q_range");
        }
        cfg.schedule = t;
    } else if (schedule_kind == "codesign") {
        CodesignSchedule c;
        if (const auto e = take("local_steps")) {
            c.local_steps = parse_int_list(e->value, e->line, "local_steps");
        }
        {
            const auto e = require("anchor_q");
            c.anchor_q = parse_real(e.value, e.line, "anchor_q");
        }
        cfg.schedule = c;
    } else {
        throw ValidationError("unknown schedule type '" + schedule_kind +
                              "' (use static, uniform, two-group, or codesign)");
    }

    std::string anchor_kind = "gaussian";
    if (const auto e = take("anchors")) {
        anchor_kind = e->value;
    }
    if (anchor_kind == "gaussian") {
        cfg.anchors.gaussian = true;
    } else if (anchor_kind == "explicit") {
        cfg.anchors.gaussian = false;
        for (int m = 0; m < cfg.clients; ++m) {
            const std::string key = "anchor_" + std::to_string(m);
            const auto e = take(key);
            if (!e) {
                throw ValidationError("explicit anchors require key '" + key + "'");
            }
            const auto values = parse_real_list(e->value, e->line, key);
            Vec anchor(static_cast<Eigen::Index>(values.size()));
            for (std::size_t i = 0; i < values.size(); ++i) {
                anchor[static_cast<Eigen::Index>(i)] = values[i];
            }
            cfg.anchors.explicit_anchors.push_back(std::move(anchor));
        }
    } else {
        throw ValidationError("unknown anchors mode '" + anchor_kind +
                              "' (use gaussian or explicit)");
    }

    if (!globals.empty()) {
        const auto& [key, entry] = *globals.begin();
        std::ostringstream msg;
        msg << "unknown key '" << key << "' (line " << entry.line << ")";
        throw ValidationError(msg.str());
    }

    for (RawSection& section : sections) {
        AlgorithmSpec algo;
        algo.label = section.label;
        auto method_it = section.entries.find("method");
        if (method_it == section.entries.end()) {
            throw ValidationError("algorithm '" + section.label + "' requires key 'method'");
        }
        algo.method = parse_method(method_it->second.value, method_it->second.line);
        section.entries.erase(method_it);

        std::string solver_kind = "sgd";
        if (auto it = section.entries.find("solver"); it != section.entries.end()) {
            solver_kind = it->second.value;
            section.entries.erase(it);
        }
        std::optional<double> solver_param;
        if (auto it = section.entries.find("solver_param"); it != section.entries.end()) {
            solver_param = parse_real(it->second.value, it->second.line, "solver_param");
            section.entries.erase(it);
        }
        if (solver_kind == "sgd") {
            if (solver_param) {
                throw ValidationError("algorithm '" + section.label +
                                      "': solver 'sgd' takes no solver_param");
            }
            algo.solver = SolverSpec::plain();
        } else {
            if (!solver_param) {
                throw ValidationError("algorithm '" + section.label + "': solver '" + solver_kind +
                                      "' requires key 'solver_param'");
            }
            if (solver_kind == "momentum") {
                algo.solver = SolverSpec::momentum(*solver_param);
            } else if (solver_kind == "proximal") {
                algo.solver = SolverSpec::proximal(*solver_param);
            } else if (solver_kind == "decayed") {
                algo.solver = SolverSpec::decayed(*solver_param);
            } else {
                throw ValidationError("algorithm '" + section.label + "': unknown solver '" +
                                      solver_kind + "'");
            }
        }
        if (!section.entries.empty()) {
            const auto& [key, entry] = *section.entries.begin();
            std::ostringstream msg;
            msg << "unknown key '" << key << "' in algorithm '" << section.label << "' (line "
                << entry.line << ")";
            throw ValidationError(msg.str());
        }
        cfg.algorithms.push_back(std::move(algo));
    }

    try {
        validate_config(cfg);
    } catch (const ConfigError&) {
        throw;
    } catch (const SimError& e) {
        throw ValidationError(e.what());
    }
    return cfg;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    try {
        return parse_text_impl(text);
    } catch (const ParseError& e) {
        throw ParseError(origin + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(origin + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(origin + ": " + e.what());
    }
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read config file: " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path);
}

std::string encode_config(const ExperimentConfig& config) {
    std::ostringstream out;
    out << "clients = " << config.clients << "\n";
    out << "dim = " << config.dim << "\n";
    out << "rounds = " << config.rounds << "\n";
    out << "replicates = " << config.replicates << "\n";
    out << "sample_count = " << config.sample_count << "\n";
    out << "eta = " << fmt_real(config.eta) << "\n";
    out << "sigma_sq = " << fmt_real(config.sigma_sq) << "\n";
    out << "seed = " << config.seed << "\n";
    out << "calibrate = " << (config.calibrate ? "true" : "false") << "\n";
    out << "record_every = " << config.record_every << "\n";
    out << "blowup_guard = " << fmt_real(config.blowup_guard) << "\n";
    out << "jobs = " << config.jobs << "\n";
    if (!config.weights.empty()) {
        out << "weights =";
        for (double w : config.weights) {
            out << " " << fmt_real(w);
        }
        out << "\n";
    }
    if (const auto* s = std::get_if<StaticSchedule>(&config.schedule)) {
        out << "schedule = static\n";
        out << "local_steps =";
        for (int t : s->local_steps) {
            out << " " << t;
        }
        out << "\n";
        out << "failure_probs =";
        for (double q : s->failure_probs) {
            out << " " << fmt_real(q);
        }
        out << "\n";
    } else if (const auto* u = std::get_if<UniformSchedule>(&config.schedule)) {
        out << "schedule = uniform\n";
        out << "steps_range = " << u->steps.lo << " " << u->steps.hi << "\n";
        out << "q_range = " << fmt_real(u->q.lo) << " " << fmt_real(u->q.hi) << "\n";
        out << "per_round = " << (u->per_round ? "true" : "false") << "\n";
    } else if (const auto* t = std::get_if<TwoGroupSchedule>(&config.schedule)) {
        out << "schedule = two-group\n";
        out << "group_split = " << t->group_split << "\n";
        out << "group1_steps_range = " << t->fast.steps.lo << " " << t->fast.steps.hi << "\n";
        out << "group1_q_range = " << fmt_real(t->fast.q.lo) << " " << fmt_real(t->fast.q.hi)
            << "\n";
        out << "group2_steps_range = " << t->slow.steps.lo << " " << t->slow.steps.hi << "\n";
        out << "group2_q_range = " << fmt_real(t->slow.q.lo) << " " << fmt_real(t->slow.q.hi)
            << "\n";
    } else if (const auto* c = std::get_if<CodesignSchedule>(&config.schedule)) {
        out << "schedule = codesign\n";
        out << "local_steps =";
        for (int t : c->local_steps) {
            out << " " << t;
        }
        out << "\n";
        out << "anchor_q = " << fmt_real(c->anchor_q) << "\n";
    }
    if (config.anchors.gaussian) {
        out << "anchors = gaussian\n";
    } else {
        out << "anchors = explicit\n";
        for (std::size_t m = 0; m < config.anchors.explicit_anchors.size(); ++m) {
            out << "anchor_" << m << " =";
            const Vec& e = config.anchors.explicit_anchors[m];
            for (Eigen::Index i = 0; i < e.size(); ++i) {
                out << " " << fmt_real(e[i]);
            }
            out << "\n";
        }
    }
    for (const AlgorithmSpec& algo : config.algorithms) {
        out << "\n[algorithm " << algo.label << "]\n";
        out << "method = " << method_name(algo.method) << "\n";
        out << "solver = " << solver_name(algo.solver) << "\n";
        if (algo.solver.kind != SolverKind::PlainSgd) {
            out << "solver_param = " << fmt_real(algo.solver.param) << "\n";
        }
    }
    return out.str();
}

namespace {

constexpr const char* kPresetExample2 = R"(# Two-client scalar instance with closed-form limits: plain averaging lands
# at 6/7, heterogeneity-aware sampling at the target 1/2.
clients = 2
dim = 1
rounds = 20000
replicates = 32
sample_count = 2
eta = 0.001
sigma_sq = 0
seed = 12
calibrate = true
record_every = 100
weights = 0.5 0.5
schedule = static
local_steps = 1 3
failure_probs = 0.5 0
anchors = explicit
anchor_0 = 0
anchor_1 = 1

[algorithm fedavg]
method = fedavg
solver = sgd

[algorithm fedacs]
method = fedacs
solver = sgd
)";

constexpr const char* kPresetFig2Left = R"(# Homogeneous population: every client runs 15 local steps over a link that
# drops 20% of uploads.
clients = 30
dim = 10
rounds = 10000
replicates = 4
sample_count = 15
eta = 0.001
sigma_sq = 0
seed = 21
calibrate = true
record_every = 20
schedule = static
local_steps = 15
failure_probs = 0.2
anchors = gaussian

[algorithm fedavg-sgd]
method = fedavg
solver = sgd

[algorithm fedavg-momentum]
method = fedavg
solver = momentum
solver_param = 0.3

[algorithm fedavg-proximal]
method = fedavg
solver = proximal
solver_param = 1

[algorithm fedavg-decayed]
method = fedavg
solver = decayed
solver_param = 0.005

[algorithm fedacs]
method = fedacs
solver = sgd
)";

constexpr const char* kPresetFig2Middle = R"(# Static heterogeneity: per-client step counts and drop rates drawn once.
clients = 30
dim = 10
rounds = 10000
replicates = 4
sample_count = 15
eta = 0.001
sigma_sq = 0
seed = 22
calibrate = true
record_every = 20
schedule = uniform
steps_range = 1 30
q_range = 0.01 0.3
per_round = false
anchors = gaussian

[algorithm fedavg-sgd]
method = fedavg
solver = sgd

[algorithm fedavg-momentum]
method = fedavg
solver = momentum
solver_param = 0.3

[algorithm fedavg-proximal]
method = fedavg
solver = proximal
solver_param = 1

[algorithm fedavg-decayed]
method = fedavg
solver = decayed
solver_param = 0.005

[algorithm fedacs]
method = fedacs
solver = sgd
)";

constexpr const char* kPresetFig2Right = R"(# Dynamic two-group heterogeneity: each round redraws step counts and drop
# rates, slow links paired with little local work and vice versa.
clients = 30
dim = 10
rounds = 10000
replicates = 4
sample_count = 15
eta = 0.001
sigma_sq = 0
seed = 23
calibrate = true
record_every = 20
schedule = two-group
group_split = 15
group1_steps_range = 1 10
group1_q_range = 0.2 0.4
group2_steps_range = 20 30
group2_q_range = 0 0.2
anchors = gaussian

[algorithm fedavg-sgd]
method = fedavg
solver = sgd

[algorithm fedavg-momentum]
method = fedavg
solver = momentum
solver_param = 0.3

[algorithm fedavg-proximal]
method = fedavg
solver = proximal
solver_param = 1

[algorithm fedavg-decayed]
method = fedavg
solver = decayed
solver_param = 0.005

[algorithm fedacs]
method = fedacs
solver = sgd
)";

constexpr const char* kPresetFig4 = R"(# Communication rates completed from the step counts so that every client's
# expected delivered work matches client 0 (two step-groups, anchor q 0.01;
# the completed rate for the 3-step group is 0.34).
clients = 30
dim = 10
rounds = 10000
replicates = 32
sample_count = 15
eta = 0.001
sigma_sq = 0
seed = 41
calibrate = true
record_every = 20
schedule = codesign
local_steps = 2 2 2 2 2 2 2 2 2 2 2 2 2 2 2 2 2 2 2 2 3 3 3 3 3 3 3 3 3 3
anchor_q = 0.01
anchors = gaussian

[algorithm fedavg]
method = fedavg
solver = sgd
)";

constexpr const char* kPresetAchievability = R"(# Symmetric two-client scalar instance whose error floor is exactly 1/9:
# anchors at -1 and +1, step counts 1 and 2, perfect links.
clients = 2
dim = 1
rounds = 20000
replicates = 32
sample_count = 32
eta = 0.001
sigma_sq = 0
seed = 7
calibrate = false
record_every = 100
weights = 0.5 0.5
schedule = static
local_steps = 1 2
failure_probs = 0 0
anchors = explicit
anchor_0 = -1
anchor_1 = 1

[algorithm fedavg]
method = fedavg
solver = sgd
)";

const std::map<std::string, const char*>& preset_table() {
    static const std::map<std::string, const char*> table = {
        {"example2-static", kPresetExample2},   {"fig2-left", kPresetFig2Left},
        {"fig2-middle", kPresetFig2Middle},     {"fig2-right", kPresetFig2Right},
        {"fig4-codesign", kPresetFig4},         {"achievability", kPresetAchievability},
    };
    return table;
}

}  // namespace

std::vector<std::string> preset_names() {
    std::vector<std::string> out;
    for (const auto& [name, text] : preset_table()) {
        out.push_back(name);
    }
    return out;
}

std::string preset_text(const std::string& name) {
    const auto& table = preset_table();
    auto it = table.find(name);
    if (it == table.end()) {
        std::ostringstream msg;
        msg << "unknown preset '" << name << "'; available:";
        for (const auto& [known, text] : table) {
            msg << " " << known;
        }
        throw UnknownPreset(msg.str());
    }
    return it->second;
}

ExperimentConfig preset(const std::string& name) {
    return parse_config_text(preset_text(name), "preset:" + name);
}

namespace {

constexpr std::array<const char*, 6> kMetricColumns = {
    "dist_true", "dist_surrogate", "grad_norm_sq", "chi_square", "eta_eff", "t_eff"};

struct CsvRow {
    int replicate = 0;
    std::int64_t round = 0;
    const std::string* algorithm = nullptr;
    std::array<double, 6> values{};
};

}  // namespace

std::string render_csv(const std::vector<AlgorithmRun>& runs) {
    std::vector<CsvRow> rows;
    for (const AlgorithmRun& run : runs) {
        for (const ReplicateRun& rep : run.replicates) {
            for (const RoundRecord& record : rep.records) {
                CsvRow row;
                row.replicate = rep.replicate;
                row.round = record.round;
                row.algorithm = &run.algo.label;
                for (std::size_t i = 0; i < kMetricColumns.size(); ++i) {
                    auto it = record.metrics.find(kMetricColumns[i]);
                    if (it == record.metrics.end()) {
                        throw WrongShape(std::string("record missing metric ") +
                                         kMetricColumns[i]);
                    }
                    row.values[i] = it->second;
                }
                rows.push_back(row);
            }
        }
    }
    if (rows.empty()) {
        throw WrongShape("no records to emit");
    }
    std::sort(rows.begin(), rows.end(), [](const CsvRow& a, const CsvRow& b) {
        if (a.replicate != b.replicate) {
            return a.replicate < b.replicate;
        }
        if (a.round != b.round) {
            return a.round < b.round;
        }
        return *a.algorithm < *b.algorithm;
    });

    std::string out =
        "replicate,round,algorithm,dist_true,dist_surrogate,grad_norm_sq,chi_square,eta_eff,t_"
        "eff\n";
    for (const CsvRow& row : rows) {
        out += std::to_string(row.replicate);
        out += ',';
        out += std::to_string(row.round);
        out += ',';
        out += *row.algorithm;
        for (double v : row.values) {
            out += ',';
            out += fmt_real(v);
        }
        out += '\n';
    }
    return out;
}

void emit_csv(const std::vector<AlgorithmRun>& runs, const std::string& path) {
    const std::string body = render_csv(runs);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open output file: " + path);
    }
    out << body;
    if (!out) {
        throw IoError("failed writing output file: " + path);
    }
}

}  // namespace fedsim
