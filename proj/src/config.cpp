#include "cdslab/config.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <fstream>
#include <set>
#include <sstream>

#include "cdslab/rng.hpp"

namespace cdslab {

using nlohmann::json;

bool TomlDocument::has_section(const std::string& name) const {
    return std::find(sections.begin(), sections.end(), name) != sections.end();
}

int TomlDocument::line_of(const std::string& path) const {
    const auto it = lines.find(path);
    return it == lines.end() ? 0 : it->second;
}

namespace {

struct SyntaxError {
    std::string message;
};

bool is_key_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
}

class TomlParser {
public:
    explicit TomlParser(std::string_view text) : text_(text) {}

    TomlDocument run() {
        while (true) {
            skip_blank_lines();
            if (at_end()) break;
            const int start_line = line_;
            try {
                if (peek() == '[') {
                    header();
                } else {
                    assignment();
                }
            } catch (const SyntaxError& e) {
                errors_.push_back("line " + std::to_string(start_line) + ": " + e.message);
                skip_rest_of_line();
            }
        }
        if (!errors_.empty()) {
            std::string msg = "config syntax:";
            for (const auto& e : errors_) msg += " " + e + ";";
            throw ConfigError(msg);
        }
        return std::move(doc_);
    }

private:
    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return at_end() ? '\0' : text_[pos_]; }

    char take() {
        const char c = text_[pos_++];
        if (c == '\n') ++line_;
        return c;
    }

    void skip_spaces() {
        while (!at_end() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) ++pos_;
    }

    void skip_comment() {
        if (peek() == '#') {
            while (!at_end() && peek() != '\n') ++pos_;
        }
    }

    void skip_blank_lines() {
        while (!at_end()) {
            skip_spaces();
            skip_comment();
            if (peek() != '\n') return;
            take();
        }
    }

    // Inside arrays and inline tables newlines and comments are insignificant.
    void skip_layout() {
        while (!at_end()) {
            skip_spaces();
            skip_comment();
            if (peek() != '\n') return;
            take();
        }
    }

    void skip_rest_of_line() {
        while (!at_end() && peek() != '\n') ++pos_;
        if (!at_end()) take();
    }

    void end_of_statement() {
        skip_spaces();
        skip_comment();
        if (at_end()) return;
        if (peek() != '\n') throw SyntaxError{std::string("unexpected '") + peek() + "' after value"};
        take();
    }

    void header() {
        take();
        skip_spaces();
        const std::string name = key();
        skip_spaces();
        if (peek() != ']') throw SyntaxError{"expected ']' after section name"};
        take();
        if (doc_.has_section(name)) throw SyntaxError{"duplicate section [" + name + "]"};
        section_ = name;
        doc_.sections.push_back(name);
        doc_.root[name] = json::object();
        doc_.lines["[" + name + "]"] = line_;
        end_of_statement();
    }

    void assignment() {
        const int key_line = line_;
        const std::string k = key();
        skip_spaces();
        if (peek() != '=') throw SyntaxError{"expected '=' after key '" + k + "'"};
        take();
        skip_spaces();
        json v = value();
        json& table = section_.empty() ? doc_.root : doc_.root[section_];
        const std::string path = section_.empty() ? k : section_ + "." + k;
        if (table.contains(k) || (section_.empty() && doc_.has_section(k))) {
            throw SyntaxError{"duplicate key '" + path + "'"};
        }
        table[k] = std::move(v);
        doc_.lines[path] = key_line;
        end_of_statement();
    }

    std::string key() {
        const std::size_t start = pos_;
        while (!at_end() && is_key_char(peek())) ++pos_;
        if (pos_ == start) {
            if (at_end()) throw SyntaxError{"expected a key"};
            throw SyntaxError{std::string("expected a key, found '") + peek() + "'"};
        }
        return std::string(text_.substr(start, pos_ - start));
    }

    json value() {
        if (at_end()) throw SyntaxError{"missing value"};
        const char c = peek();
        if (c == '"') return string();
        if (c == '[') return array();
        if (c == '{') return table();
        if (c == 't' || c == 'f') return boolean();
        if (c == '+' || c == '-' || c == '.' || (c >= '0' && c <= '9')) return number();
        throw SyntaxError{std::string("unexpected '") + c + "' where a value was expected"};
    }

    json string() {
        take();
        std::string out;
        while (true) {
            if (at_end() || peek() == '\n') throw SyntaxError{"unterminated string"};
            const char c = take();
            if (c == '"') break;
            if (c != '\\') {
                out += c;
                continue;
            }
            if (at_end()) throw SyntaxError{"unterminated string"};
            switch (take()) {
            case '"': out += '"'; break;
            case '\\': out += '\\'; break;
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            default: throw SyntaxError{"unsupported escape in string"};
            }
        }
        return out;
    }

    json boolean() {
        for (std::string_view word : {"true", "false"}) {
            if (text_.substr(pos_, word.size()) == word) {
                pos_ += word.size();
                if (!at_end() && is_key_char(peek())) break;
                return word == "true";
            }
        }
        throw SyntaxError{"invalid literal"};
    }

    json number() {
        const std::size_t start = pos_;
        while (!at_end()) {
            const char c = peek();
            if ((c >= '0' && c <= '9') || c == '+' || c == '-' || c == '.' || c == 'e' || c == 'E' || c == '_') {
                ++pos_;
            } else {
                break;
            }
        }
        std::string token;
        for (char c : text_.substr(start, pos_ - start)) {
            if (c != '_') token += c;
        }
        if (!token.empty() && token.front() == '+') token.erase(0, 1);
        const bool is_float = token.find_first_of(".eE") != std::string::npos;
        const char* first = token.data();
        const char* last = token.data() + token.size();
        if (is_float) {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec != std::errc() || ptr != last) throw SyntaxError{"invalid number '" + token + "'"};
            return v;
        }
        std::int64_t v = 0;
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last) throw SyntaxError{"invalid integer '" + token + "'"};
        return v;
    }

    json array() {
        take();
        json out = json::array();
        while (true) {
            skip_layout();
            if (at_end()) throw SyntaxError{"unterminated array"};
            if (peek() == ']') break;
            out.push_back(value());
            skip_layout();
            if (peek() == ',') {
                take();
                continue;
            }
            if (peek() != ']') throw SyntaxError{"expected ',' or ']' in array"};
        }
        take();
        return out;
    }

    json table() {
        take();
        json out = json::object();
        while (true) {
            skip_layout();
            if (at_end()) throw SyntaxError{"unterminated inline table"};
            if (peek() == '}') break;
            const std::string k = key();
            skip_spaces();
            if (peek() != '=') throw SyntaxError{"expected '=' after key '" + k + "'"};
            take();
            skip_spaces();
            if (out.contains(k)) throw SyntaxError{"duplicate key '" + k + "' in inline table"};
            out[k] = value();
            skip_layout();
            if (peek() == ',') {
                take();
                continue;
            }
            if (peek() != '}') throw SyntaxError{"expected ',' or '}' in inline table"};
        }
        take();
        return out;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
    std::string section_;
    TomlDocument doc_;
    std::vector<std::string> errors_;
};

// --- typed extraction ---------------------------------------------------------

const std::set<std::string> kSections = {"schedule", "data", "scene", "distill", "sample", "train", "harness", "output"};

class Reader {
public:
    Reader(const TomlDocument& doc, std::string section, std::vector<std::string>& errors)
        : doc_(doc), section_(std::move(section)), errors_(errors) {}

    std::string path(const std::string& key) const { return section_.empty() ? key : section_ + "." + key; }

    std::string where(const std::string& key) const {
        const int line = doc_.line_of(path(key));
        return line > 0 ? "line " + std::to_string(line) + ": " + path(key) : path(key);
    }

    void error(const std::string& key, const std::string& msg) { errors_.push_back(where(key) + ": " + msg); }

    const json* find(const std::string& key) {
        used_.insert(key);
        const json& table = section_.empty() ? doc_.root : doc_.root.at(section_);
        const auto it = table.find(key);
        return it == table.end() ? nullptr : &*it;
    }

    bool has(const std::string& key) {
        return find(key) != nullptr;
    }

    std::optional<double> opt_number(const std::string& key) {
        const json* v = find(key);
        if (!v) return std::nullopt;
        if (!v->is_number()) {
            error(key, "expected a number");
            return std::nullopt;
        }
        return v->get<double>();
    }

    double number(const std::string& key, double def) { return opt_number(key).value_or(def); }

    std::optional<std::int64_t> opt_int64(const std::string& key) {
        const json* v = find(key);
        if (!v) return std::nullopt;
        if (!v->is_number_integer()) {
            error(key, "expected an integer");
            return std::nullopt;
        }
        return v->get<std::int64_t>();
    }

    std::optional<int> opt_integer(const std::string& key) {
        const auto v = opt_int64(key);
        if (!v) return std::nullopt;
        if (*v < std::numeric_limits<int>::min() || *v > std::numeric_limits<int>::max()) {
            error(key, "integer out of range");
            return std::nullopt;
        }
        return static_cast<int>(*v);
    }

    int integer(const std::string& key, int def) { return opt_integer(key).value_or(def); }

    int positive(const std::string& key, int def) {
        const int v = integer(key, def);
        if (v < 1) error(key, "must be >= 1");
        return v;
    }

    bool boolean(const std::string& key, bool def) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_boolean()) {
            error(key, "expected true or false");
            return def;
        }
        return v->get<bool>();
    }

    std::optional<std::string> opt_string(const std::string& key) {
        const json* v = find(key);
        if (!v) return std::nullopt;
        if (!v->is_string()) {
            error(key, "expected a string");
            return std::nullopt;
        }
        return v->get<std::string>();
    }

    std::string string(const std::string& key, const std::string& def) { return opt_string(key).value_or(def); }

    /// A string restricted to `choices`; returns the index of the match.
    std::size_t choice(const std::string& key, const std::vector<std::string_view>& choices, std::size_t def) {
        const auto v = opt_string(key);
        if (!v) return def;
        for (std::size_t i = 0; i < choices.size(); ++i) {
            if (*v == choices[i]) return i;
        }
        std::string list;
        for (const auto& c : choices) list += (list.empty() ? "" : " | ") + std::string(c);
        error(key, "expected one of " + list + ", got '" + *v + "'");
        return def;
    }

    std::optional<Vector> vector_value(const std::string& key, const json& v) {
        if (!v.is_array()) {
            error(key, "expected an array of numbers");
            return std::nullopt;
        }
        Vector out(static_cast<Index>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) {
                error(key, "expected an array of numbers");
                return std::nullopt;
            }
            out[static_cast<Index>(i)] = v[i].get<double>();
        }
        return out;
    }

    std::optional<Vector> opt_vector(const std::string& key) {
        const json* v = find(key);
        if (!v) return std::nullopt;
        return vector_value(key, *v);
    }

    std::optional<std::vector<int>> opt_integers(const std::string& key) {
        const json* v = find(key);
        if (!v) return std::nullopt;
        if (!v->is_array() || !std::all_of(v->begin(), v->end(), [](const json& e) { return e.is_number_integer(); })) {
            error(key, "expected an array of integers");
            return std::nullopt;
        }
        std::vector<int> out;
        for (const auto& e : *v) out.push_back(e.get<int>());
        return out;
    }

    std::optional<std::vector<Vector>> opt_vectors(const std::string& key) {
        const json* v = find(key);
        if (!v) return std::nullopt;
        if (!v->is_array()) {
            error(key, "expected an array of arrays");
            return std::nullopt;
        }
        std::vector<Vector> out;
        for (const auto& row : *v) {
            auto r = vector_value(key, row);
            if (!r) return std::nullopt;
            out.push_back(std::move(*r));
        }
        return out;
    }

    /// Reports every key of the section that was never looked up.
    void finish() {
        const json& table = section_.empty() ? doc_.root : doc_.root.at(section_);
        for (const auto& [k, v] : table.items()) {
            if (section_.empty() && doc_.has_section(k)) continue;
            if (!used_.count(k)) error(k, "unknown key");
        }
    }

private:
    const TomlDocument& doc_;
    std::string section_;
    std::vector<std::string>& errors_;
    std::set<std::string> used_;
};

std::optional<GaussianMixture> read_data(Reader& r) {
    const json* comps = r.find("components");
    if (!comps) {
        r.error("components", "missing (the [data] section needs a component list)");
        return std::nullopt;
    }
    if (!comps->is_array() || comps->empty()) {
        r.error("components", "expected a non-empty array of inline tables");
        return std::nullopt;
    }
    std::vector<MixtureComponent> out;
    bool ok = true;
    for (std::size_t i = 0; i < comps->size(); ++i) {
        const json& c = (*comps)[i];
        const std::string tag = "component " + std::to_string(i);
        if (!c.is_object()) {
            r.error("components", tag + ": expected an inline table");
            ok = false;
            continue;
        }
        MixtureComponent m;
        for (const auto& [k, v] : c.items()) {
            if (k == "weight" && v.is_number()) {
                m.weight = v.get<double>();
            } else if (k == "scale" && v.is_number()) {
                m.scale = v.get<double>();
            } else if (k == "label" && v.is_number_integer()) {
                m.label = v.get<int>();
            } else if (k == "mean") {
                auto mean = r.vector_value("components", v);
                if (!mean) {
                    ok = false;
                    continue;
                }
                m.mean = std::move(*mean);
            } else if (k == "weight" || k == "scale" || k == "label") {
                r.error("components", tag + ": " + k + " has the wrong type");
                ok = false;
            } else {
                r.error("components", tag + ": unknown key '" + k + "'");
                ok = false;
            }
        }
        if (!c.contains("mean")) {
            r.error("components", tag + ": missing mean");
            ok = false;
        }
        if (!c.contains("weight")) {
            r.error("components", tag + ": missing weight");
            ok = false;
        }
        out.push_back(std::move(m));
    }
    if (!ok) return std::nullopt;
    try {
        return GaussianMixture(std::move(out));
    } catch (const Error& e) {
        r.error("components", e.what());
        return std::nullopt;
    }
}

std::optional<TaskSpec> read_scene(Reader& r, std::uint64_t global_seed) {
    TaskSpec spec;
    const auto seed = r.opt_int64("seed");
    if (seed && *seed < 0) r.error("seed", "must be >= 0");
    spec.seed = seed ? static_cast<std::uint64_t>(*seed) : global_seed;
    spec.views = r.positive("views", spec.views);
    spec.d_img = r.positive("d_img", spec.d_img);
    spec.d_scene = r.positive("d_scene", spec.d_scene);
    spec.scale = r.number("scale", spec.scale);
    spec.identity_views = r.boolean("identity", false);
    if (auto labels = r.opt_integers("labels")) spec.labels = std::move(*labels);
    auto modes = r.opt_vectors("modes");
    if (!modes) {
        if (!r.has("modes")) r.error("modes", "missing (the [scene] section needs scene modes)");
        return std::nullopt;
    }
    spec.modes = std::move(*modes);
    try {
        make_task(spec);
    } catch (const Error& e) {
        r.error("modes", e.what());
        return std::nullopt;
    }
    return spec;
}

void read_schedule(Reader& r, RunConfig& cfg) {
    ScheduleParams& s = cfg.distill.schedule;
    cfg.horizon = r.number("horizon", cfg.horizon);
    if (!(cfg.horizon > 0.0)) r.error("horizon", "must be > 0");
    s.t_min = r.number("t_min", s.t_min);
    s.t_max = r.number("t_max", s.t_max);
    s.delta = r.number("delta", s.delta);
    s.cap_delta = r.number("cap_delta", s.cap_delta);
    s.total_iters = r.integer("iters", s.total_iters);
    if (!(s.t_min >= 0.0 && s.t_min < 1.0)) r.error("t_min", "must lie in [0, 1)");
    if (!(s.t_max <= 1.0)) {
        r.error("t_max", "must be <= 1");
    } else if (!(s.t_max > s.t_min)) {
        r.error(r.has("t_max") ? "t_max" : "t_min", "t_min must be below t_max (" + std::to_string(s.t_max) + ")");
    }
    if (!(s.delta >= 0.0)) r.error("delta", "must be >= 0");
    if (!(s.cap_delta > 0.0)) r.error("cap_delta", "must be > 0");
    if (s.delta > s.cap_delta) {
        r.error("delta", "conflicts with " + r.where("cap_delta") + ": delta must not exceed cap_delta");
    }
    if (s.t_max + s.cap_delta > 1.0 + 1e-12) {
        r.error("t_max", "conflicts with " + r.where("cap_delta") + ": t_max + cap_delta must be <= 1");
    }
    if (s.total_iters < 1) r.error("iters", "must be >= 1");

    const auto w_start = r.opt_number("cfg_start");
    const auto w_end = r.opt_number("cfg_end");
    if (w_start && w_end) {
        cfg.distill.cfg = CfgSchedule{*w_start, *w_end};
    } else if (w_start || w_end) {
        r.error(w_start ? "cfg_end" : "cfg_start", "cfg_start and cfg_end must be given together");
    }
}

void read_distill(Reader& r, RunConfig& cfg) {
    DistillRunConfig& d = cfg.distill;
    d.loss = r.choice("loss", {"sds", "cds"}, 1) == 0 ? LossKind::sds : LossKind::cds;
    d.lambda = r.choice("lambda", {"unit", "inv-sigma-sq"}, 0) == 0 ? LambdaMode::unit : LambdaMode::inv_sigma_sq;
    d.optimizer.kind = r.choice("optimizer", {"adam", "sgd"}, 0) == 0 ? OptimizerKind::adam : OptimizerKind::sgd;
    d.optimizer.lr = r.number("lr", d.optimizer.lr);
    d.optimizer.beta1 = r.number("beta1", d.optimizer.beta1);
    d.optimizer.beta2 = r.number("beta2", d.optimizer.beta2);
    d.optimizer.eps = r.number("adam_eps", d.optimizer.eps);
    if (!(d.optimizer.lr > 0.0)) r.error("lr", "must be > 0");
    if (!(d.optimizer.beta1 >= 0.0 && d.optimizer.beta1 < 1.0)) r.error("beta1", "must lie in [0, 1)");
    if (!(d.optimizer.beta2 >= 0.0 && d.optimizer.beta2 < 1.0)) r.error("beta2", "must lie in [0, 1)");
    if (!(d.optimizer.eps > 0.0)) r.error("adam_eps", "must be > 0");
    d.poses_per_iter = r.positive("poses", d.poses_per_iter);
    d.label = r.opt_integer("label");
    d.t2_mode = r.choice("t2_mode", {"annealed", "random"}, 0) == 0 ? T2Mode::annealed : T2Mode::random;
    d.noise_mode = r.choice("noise_mode", {"fixed", "per_iteration"}, 0) == 0 ? NoiseMode::fixed
                                                                              : NoiseMode::per_iteration;
    d.init_scale = r.opt_number("init_scale");
    if (d.init_scale && !(*d.init_scale >= 0.0)) r.error("init_scale", "must be >= 0");
    d.init_theta = r.opt_vector("init_theta");
    d.stop_after = r.opt_integer("stop_after");
    d.divergence_bound = r.number("divergence_bound", d.divergence_bound);
    if (!(d.divergence_bound > 0.0)) r.error("divergence_bound", "must be > 0");
}

void read_sample(Reader& r, SampleSection& s) {
    s.mode = r.choice("mode", {"ode", "sde"}, 0) == 0 ? "ode" : "sde";
    s.runs = r.positive("runs", s.runs);
    s.steps = r.positive("steps", s.steps);
    s.denoiser = r.string("denoiser", s.denoiser);
    s.label = r.opt_integer("label");
    s.cfg_w = r.opt_number("cfg_w");
    if (s.cfg_w && !s.label) r.error("cfg_w", "requires label");
    s.trajectory_runs = r.integer("trajectory_runs", s.trajectory_runs);
    if (s.trajectory_runs < 0) r.error("trajectory_runs", "must be >= 0");
}

void read_train(Reader& r, TrainSection& t) {
    if (auto hidden = r.opt_integers("hidden")) {
        if (hidden->empty() || std::any_of(hidden->begin(), hidden->end(), [](int w) { return w < 1; })) {
            r.error("hidden", "expected one or more positive widths");
        } else {
            t.hidden = std::move(*hidden);
        }
    }
    t.steps = r.positive("steps", t.steps);
    t.batch = r.positive("batch", t.batch);
    t.lr = r.number("lr", t.lr);
    if (!(t.lr > 0.0)) r.error("lr", "must be > 0");
    t.output = r.string("output", t.output);
    if (t.output.empty()) r.error("output", "must not be empty");
}

void read_harness(Reader& r, HarnessSection& h) {
    h.equivalence_steps = r.integer("equivalence_steps", h.equivalence_steps);
    if (h.equivalence_steps < 2) r.error("equivalence_steps", "must be >= 2");
    h.equivalence_seeds = r.positive("equivalence_seeds", h.equivalence_seeds);
    if (auto deltas = r.opt_vector("scan_deltas")) {
        std::vector<double> v(deltas->begin(), deltas->end());
        std::sort(v.begin(), v.end());
        if (std::unique(v.begin(), v.end()) - v.begin() < 3) r.error("scan_deltas", "needs at least 3 distinct values");
        if (!v.empty() && !(v.front() > 0.0 && v.back() < 1.0)) r.error("scan_deltas", "values must lie in (0, 1)");
        h.scan_deltas.assign(deltas->begin(), deltas->end());
    }
    h.scan_seeds = r.positive("scan_seeds", h.scan_seeds);
    h.variance_samples = r.integer("variance_samples", h.variance_samples);
    if (h.variance_samples < 2) r.error("variance_samples", "must be >= 2");
    h.variance_iter = r.opt_integer("variance_iter");
    h.ablation_seeds = r.positive("ablation_seeds", h.ablation_seeds);
}

} // namespace

TomlDocument parse_toml(std::string_view text) { return TomlParser(text).run(); }

bool RunConfig::has_section(std::string_view name) const {
    return std::find(sections.begin(), sections.end(), name) != sections.end();
}

void RunConfig::require_sections(std::string_view subcommand, const std::vector<std::string>& names) const {
    std::string missing;
    for (const auto& n : names) {
        if (!has_section(n)) missing += (missing.empty() ? "[" : ", [") + n + "]";
    }
    if (!missing.empty()) throw ConfigError(std::string(subcommand) + " requires missing section(s) " + missing);
}

RunConfig config_from_document(const TomlDocument& doc) {
    std::vector<std::string> errors;
    RunConfig cfg;
    cfg.sections = doc.sections;
    for (const auto& s : doc.sections) {
        if (!kSections.count(s)) {
            errors.push_back("line " + std::to_string(doc.line_of("[" + s + "]")) + ": unknown section [" + s + "]");
        }
    }

    Reader global(doc, "", errors);
    const auto seed = global.opt_int64("seed");
    if (seed && *seed < 0) global.error("seed", "must be >= 0");
    if (seed && *seed >= 0) cfg.seed = static_cast<std::uint64_t>(*seed);
    cfg.out_dir = global.string("out_dir", cfg.out_dir.string());
    if (cfg.out_dir.empty()) global.error("out_dir", "must not be empty");
    global.finish();

    auto section = [&](const std::string& name, auto&& fn) {
        if (!doc.has_section(name)) return;
        Reader r(doc, name, errors);
        fn(r);
        r.finish();
    };
    section("schedule", [&](Reader& r) { read_schedule(r, cfg); });
    section("data", [&](Reader& r) { cfg.data = read_data(r); });
    section("scene", [&](Reader& r) { cfg.scene = read_scene(r, cfg.seed); });
    section("distill", [&](Reader& r) { read_distill(r, cfg); });
    section("sample", [&](Reader& r) { read_sample(r, cfg.sample); });
    section("train", [&](Reader& r) { read_train(r, cfg.train); });
    section("harness", [&](Reader& r) { read_harness(r, cfg.harness); });
    section("output", [&](Reader& r) {
        cfg.output.trajectories = r.boolean("trajectories", cfg.output.trajectories);
        cfg.output.run_log = r.boolean("run_log", cfg.output.run_log);
    });
    cfg.distill.seed = cfg.seed;

    if (errors.empty()) {
        // Cross-section constraints; per-key checks above already passed.
        const DistillRunConfig& d = cfg.distill;
        const int line = doc.line_of("distill.label");
        if (d.cfg && !d.label) {
            errors.push_back("line " + std::to_string(doc.line_of("schedule.cfg_start")) +
                             ": schedule.cfg_start: guidance requires distill.label");
        }
        if (d.stop_after && (*d.stop_after < 0 || *d.stop_after > d.schedule.total_iters)) {
            errors.push_back("line " + std::to_string(doc.line_of("distill.stop_after")) +
                             ": distill.stop_after: must lie in [0, schedule.iters]");
        }
        if (cfg.harness.variance_iter &&
            (*cfg.harness.variance_iter < 0 || *cfg.harness.variance_iter > d.schedule.total_iters)) {
            errors.push_back("line " + std::to_string(doc.line_of("harness.variance_iter")) +
                             ": harness.variance_iter: must lie in [0, schedule.iters]");
        }
        if (cfg.scene && d.init_theta && d.init_theta->size() != cfg.scene->d_scene) {
            errors.push_back("line " + std::to_string(doc.line_of("distill.init_theta")) +
                             ": distill.init_theta: length differs from scene.d_scene");
        }
        if (cfg.scene && d.label) {
            const auto& labels = cfg.scene->labels;
            const bool found = labels.empty() ? *d.label == 0
                                              : std::find(labels.begin(), labels.end(), *d.label) != labels.end();
            if (!found) {
                errors.push_back("line " + std::to_string(line) + ": distill.label: no scene mode carries this label");
            }
        }
        if (cfg.data && cfg.sample.label && !cfg.data->has_label(*cfg.sample.label)) {
            errors.push_back("line " + std::to_string(doc.line_of("sample.label")) +
                             ": sample.label: no data component carries this label");
        }
    }

    if (!errors.empty()) {
        std::string msg = "invalid config:";
        for (const auto& e : errors) msg += " " + e + ";";
        throw ConfigError(msg);
    }
    return cfg;
}

RunConfig parse_config_text(std::string_view text) {
    RunConfig cfg = config_from_document(parse_toml(text));
    cfg.source_hash = fnv1a64(text.data(), text.size());
    return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("failed reading config file " + path.string());
    return parse_config_text(buf.str());
}

} // namespace cdslab
