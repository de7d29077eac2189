#include "matcap/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace matcap {

using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::string& header) : buf_(header + "\n") {
    columns_ = static_cast<size_t>(std::count(header.begin(), header.end(), ',')) + 1;
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw_error(ErrorCode::ConfigError, "CsvWriter: column count mismatch");
    for (size_t i = 0; i < cells.size(); ++i) {
        if (i) buf_ += ',';
        buf_ += cells[i];
    }
    buf_ += '\n';
}

void CsvWriter::write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw_error(ErrorCode::ConfigError, "CsvWriter: cannot open " + path);
    out << buf_;
}

SvgPlot::SvgPlot(std::string title, std::string x_label, std::string y_label, bool log_y)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)), log_y_(log_y) {}

void SvgPlot::add(SvgSeries series) { series_.push_back(std::move(series)); }

namespace {

std::string fmt_tick(double v) {
    if (std::abs(v) < 1e-300) return "0";
    return format_double(v);
}

// largest {1,2,5}*10^k not above the raw step
double nice_step(double raw) {
    double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {5.0, 2.0, 1.0})
        if (m * mag <= raw + 1e-12 * mag) return m * mag;
    return mag;
}

}  // namespace

std::string SvgPlot::render_group(double ox, double oy, double width, double height) const {
    const double ml = 62, mr = 14, mt = 30, mb = 44;
    const double pw = width - ml - mr, ph = height - mt - mb;

    double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
    for (const auto& s : series_)
        for (size_t i = 0; i < s.x.size(); ++i) {
            double y = s.y[i];
            if (log_y_ && y <= 0.0) continue;
            double ty = log_y_ ? std::log10(y) : y;
            x_min = std::min(x_min, s.x[i]);
            x_max = std::max(x_max, s.x[i]);
            y_min = std::min(y_min, ty);
            y_max = std::max(y_max, ty);
        }
    if (x_min > x_max) {
        x_min = 0;
        x_max = 1;
        y_min = 0;
        y_max = 1;
    }
    if (x_max - x_min < 1e-12) {
        x_min -= 1.0;
        x_max += 1.0;
    }
    if (y_max - y_min < 1e-12) {
        y_min -= 1.0;
        y_max += 1.0;
    }

    auto px = [&](double x) { return ox + ml + (x - x_min) / (x_max - x_min) * pw; };
    auto py = [&](double yt) { return oy + mt + (1.0 - (yt - y_min) / (y_max - y_min)) * ph; };

    std::ostringstream svg;
    svg << "<g font-family=\"monospace\" font-size=\"11\">\n";
    svg << "<text x=\"" << format_double(ox + ml) << "\" y=\"" << format_double(oy + 16)
        << "\" font-size=\"13\">" << title_ << "</text>\n";
    // frame
    svg << "<rect x=\"" << format_double(ox + ml) << "\" y=\"" << format_double(oy + mt) << "\" width=\""
        << format_double(pw) << "\" height=\"" << format_double(ph)
        << "\" fill=\"none\" stroke=\"#333\"/>\n";

    const double x_step = nice_step((x_max - x_min) / 4.0);
    for (double t = std::ceil(x_min / x_step) * x_step; t <= x_max + 1e-9 * x_step; t += x_step) {
        svg << "<line x1=\"" << format_double(px(t)) << "\" y1=\"" << format_double(oy + mt + ph)
            << "\" x2=\"" << format_double(px(t)) << "\" y2=\"" << format_double(oy + mt + ph + 4)
            << "\" stroke=\"#333\"/>\n";
        svg << "<text x=\"" << format_double(px(t) - 8) << "\" y=\"" << format_double(oy + mt + ph + 16)
            << "\">" << fmt_tick(t) << "</text>\n";
    }
    const double y_step = nice_step((y_max - y_min) / 4.0);
    for (double t = std::ceil(y_min / y_step) * y_step; t <= y_max + 1e-9 * y_step; t += y_step) {
        svg << "<line x1=\"" << format_double(ox + ml - 4) << "\" y1=\"" << format_double(py(t))
            << "\" x2=\"" << format_double(ox + ml) << "\" y2=\"" << format_double(py(t))
            << "\" stroke=\"#333\"/>\n";
        std::string label = log_y_ ? ("1e" + fmt_tick(t)) : fmt_tick(t);
        svg << "<text x=\"" << format_double(ox + 4) << "\" y=\"" << format_double(py(t) + 4) << "\">"
            << label << "</text>\n";
    }
    svg << "<text x=\"" << format_double(ox + ml + pw / 2 - 10) << "\" y=\""
        << format_double(oy + mt + ph + 34) << "\">" << x_label_ << "</text>\n";
    svg << "<text x=\"" << format_double(ox + 14) << "\" y=\"" << format_double(oy + mt - 6) << "\">"
        << y_label_ << (log_y_ ? " (log)" : "") << "</text>\n";

    for (const auto& s : series_) {
        svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\""
            << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << " stroke-width=\"1.4\" points=\"";
        bool first = true;
        for (size_t i = 0; i < s.x.size(); ++i) {
            double y = s.y[i];
            if (log_y_ && y <= 0.0) continue;
            double ty = log_y_ ? std::log10(y) : y;
            if (!first) svg << ' ';
            svg << format_double(px(s.x[i])) << ',' << format_double(py(ty));
            first = false;
        }
        svg << "\"/>\n";
    }
    double ly = oy + mt + 12;
    for (const auto& s : series_) {
        if (s.label.empty()) continue;
        svg << "<line x1=\"" << format_double(ox + ml + pw - 130) << "\" y1=\"" << format_double(ly - 4)
            << "\" x2=\"" << format_double(ox + ml + pw - 110) << "\" y2=\"" << format_double(ly - 4)
            << "\" stroke=\"" << s.color << "\"" << (s.dashed ? " stroke-dasharray=\"5,3\"" : "")
            << " stroke-width=\"1.4\"/>\n";
        svg << "<text x=\"" << format_double(ox + ml + pw - 104) << "\" y=\"" << format_double(ly)
            << "\">" << s.label << "</text>\n";
        ly += 14;
    }
    svg << "</g>\n";
    return svg.str();
}

void write_svg_panels(const std::vector<SvgPlot>& panels, const std::string& path) {
    const double w = 460, h = 320;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw_error(ErrorCode::ConfigError, "write_svg_panels: cannot open " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\""
        << format_double(w * panels.size()) << "\" height=\"" << format_double(h) << "\">\n";
    for (size_t i = 0; i < panels.size(); ++i) out << panels[i].render_group(i * w, 0, w, h);
    out << "</svg>\n";
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_error(ErrorCode::ConfigError, "RunConfig: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
}

RunConfig RunConfig::from_text(const std::string& text) {
    RunConfig cfg;
    size_t first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        json doc = json::parse(text);
        if (!doc.is_object()) throw_error(ErrorCode::ConfigError, "RunConfig: JSON root must be an object");
        for (auto it = doc.begin(); it != doc.end(); ++it) {
            const json& v = it.value();
            std::string s = v.is_string() ? v.get<std::string>() : v.dump();
            cfg.kv_[it.key()] = s;
        }
        return cfg;
    }
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r");
            size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string t = trim(line);
        if (t.empty()) continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw_error(ErrorCode::ConfigError,
                        "RunConfig: expected key=value on line " + std::to_string(line_no));
        cfg.kv_[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return cfg;
}

void RunConfig::require_known(const std::vector<std::string>& allowed) const {
    for (const auto& [key, value] : kv_) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw_error(ErrorCode::ConfigError, "RunConfig: unknown key '" + key + "'");
    }
}

std::optional<std::string> RunConfig::get(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return std::nullopt;
    return it->second;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
        return std::stod(*v);
    } catch (...) {
        throw_error(ErrorCode::ConfigError, "RunConfig: key '" + key + "' is not a number");
    }
}

int RunConfig::get_int(const std::string& key, int fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
        return std::stoi(*v);
    } catch (...) {
        throw_error(ErrorCode::ConfigError, "RunConfig: key '" + key + "' is not an integer");
    }
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1") return true;
    if (*v == "false" || *v == "0") return false;
    throw_error(ErrorCode::ConfigError, "RunConfig: key '" + key + "' is not a boolean");
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
    auto v = get(key);
    return v ? *v : fallback;
}

std::vector<int> RunConfig::get_int_list(const std::string& key, const std::vector<int>& fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::vector<int> out;
    std::string cur;
    std::string body = *v;
    body.erase(std::remove_if(body.begin(), body.end(),
                              [](char c) { return c == '[' || c == ']' || c == ' '; }),
               body.end());
    std::istringstream ss(body);
    while (std::getline(ss, cur, ','))
        if (!cur.empty()) out.push_back(std::stoi(cur));
    if (out.empty()) throw_error(ErrorCode::ConfigError, "RunConfig: key '" + key + "' is an empty list");
    return out;
}

namespace {
constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string encode_base64(const unsigned char* data, size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (size_t i = 0; i < len; i += 3) {
        unsigned v = data[i] << 16;
        if (i + 1 < len) v |= data[i + 1] << 8;
        if (i + 2 < len) v |= data[i + 2];
        out += kB64[(v >> 18) & 63];
        out += kB64[(v >> 12) & 63];
        out += i + 1 < len ? kB64[(v >> 6) & 63] : '=';
        out += i + 2 < len ? kB64[v & 63] : '=';
    }
    return out;
}

std::vector<unsigned char> decode_base64(const std::string& text) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    std::vector<unsigned char> out;
    int acc = 0, bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        int v = value_of(c);
        if (v < 0) throw_error(ErrorCode::ConfigError, "decode_base64: invalid character");
        acc = (acc << 6) | v;
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<unsigned char>((acc >> bits) & 0xff));
        }
    }
    return out;
}

namespace {

json mat_to_json(const Mat& m) {
    json j;
    j["shape"] = {m.rows(), m.cols()};
    j["data"] = encode_base64(reinterpret_cast<const unsigned char*>(m.data()), m.size() * sizeof(double));
    return j;
}

Mat mat_from_json(const json& j) {
    int rows = j.at("shape")[0].get<int>();
    int cols = j.at("shape")[1].get<int>();
    auto bytes = decode_base64(j.at("data").get<std::string>());
    if (bytes.size() != static_cast<size_t>(rows) * cols * sizeof(double))
        throw_error(ErrorCode::ConfigError, "checkpoint: payload size mismatch");
    Mat m(rows, cols);
    std::memcpy(m.data(), bytes.data(), bytes.size());
    return m;
}

json train_config_to_json(const TrainConfig& cfg) {
    json j;
    j["task"] = task_name(cfg.task);
    j["external_memory"] = cfg.external_memory;
    j["batch_size"] = cfg.batch_size;
    j["lr"] = cfg.lr;
    j["max_iterations"] = cfg.max_iterations;
    j["clip_norm"] = cfg.clip_norm;
    j["seed"] = cfg.seed;
    j["eval_every"] = cfg.eval_every;
    j["eval_samples"] = cfg.eval_samples;
    j["eval_l_max"] = cfg.eval_l_max;
    j["content_n"] = cfg.content_n;
    j["l_min"] = cfg.l_min;
    j["l_max"] = cfg.l_max;
    j["item_len"] = cfg.item_len;
    j["k_min"] = cfg.k_min;
    j["k_max"] = cfg.k_max;
    j["checkpoint_every"] = cfg.checkpoint_every;
    return j;
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig cfg;
    cfg.task = parse_task(j.at("task").get<std::string>());
    cfg.external_memory = j.at("external_memory").get<bool>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.lr = j.at("lr").get<double>();
    cfg.max_iterations = j.at("max_iterations").get<int>();
    cfg.clip_norm = j.at("clip_norm").get<double>();
    cfg.seed = j.at("seed").get<uint64_t>();
    cfg.eval_every = j.at("eval_every").get<int>();
    cfg.eval_samples = j.at("eval_samples").get<int>();
    cfg.eval_l_max = j.at("eval_l_max").get<int>();
    cfg.content_n = j.at("content_n").get<int>();
    cfg.l_min = j.at("l_min").get<int>();
    cfg.l_max = j.at("l_max").get<int>();
    cfg.item_len = j.at("item_len").get<int>();
    cfg.k_min = j.at("k_min").get<int>();
    cfg.k_max = j.at("k_max").get<int>();
    cfg.checkpoint_every = j.at("checkpoint_every").get<int>();
    return cfg;
}

json model_config_to_json(const MatNtmConfig& cfg) {
    json j;
    j["content_n"] = cfg.content_n;
    j["token_n"] = cfg.token_n;
    j["hidden"] = cfg.hidden;
    j["slots"] = cfg.slots;
    j["mem_n"] = cfg.mem_n;
    j["external_memory"] = cfg.external_memory;
    j["biases"] = cfg.biases;
    return j;
}

MatNtmConfig model_config_from_json(const json& j) {
    MatNtmConfig cfg;
    cfg.content_n = j.at("content_n").get<int>();
    cfg.token_n = j.at("token_n").get<int>();
    cfg.hidden = j.at("hidden").get<std::vector<int>>();
    cfg.slots = j.at("slots").get<int>();
    cfg.mem_n = j.at("mem_n").get<int>();
    cfg.external_memory = j.at("external_memory").get<bool>();
    cfg.biases = j.at("biases").get<bool>();
    return cfg;
}

}  // namespace

void save_checkpoint(const std::string& path, const MatNtmModel& model, const TrainConfig& config,
                     const OptimizerState& opt, uint64_t rng_seed, uint64_t rng_position,
                     int iteration) {
    json j;
    j["format_version"] = 1;
    j["iteration"] = iteration;
    j["train_config"] = train_config_to_json(config);
    j["model_config"] = model_config_to_json(model.config());
    json params = json::object();
    for (const auto& p : model.params()) params[p.name] = mat_to_json(p.value);
    j["params"] = params;
    json optimizer;
    optimizer["decay"] = opt.decay;
    optimizer["eps_stab"] = opt.eps_stab;
    json acc = json::object();
    for (size_t i = 0; i < opt.acc.size(); ++i) acc[model.params()[i].name] = mat_to_json(opt.acc[i]);
    optimizer["acc"] = acc;
    j["optimizer"] = optimizer;
    j["rng"] = {{"seed", rng_seed}, {"position", rng_position}};

    std::ofstream out(path, std::ios::binary);
    if (!out) throw_error(ErrorCode::ConfigError, "save_checkpoint: cannot open " + path);
    out << j.dump(1) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_error(ErrorCode::ConfigError, "load_checkpoint: cannot open " + path);
    json j = json::parse(in);
    LoadedCheckpoint ck;
    ck.format_version = j.at("format_version").get<int>();
    ck.iteration = j.at("iteration").get<int>();
    ck.train_config = train_config_from_json(j.at("train_config"));
    ck.model_config = model_config_from_json(j.at("model_config"));
    for (auto it = j.at("params").begin(); it != j.at("params").end(); ++it)
        ck.params.push_back({it.key(), mat_from_json(it.value())});
    const json& opt = j.at("optimizer");
    ck.optimizer.decay = opt.at("decay").get<double>();
    ck.optimizer.eps_stab = opt.at("eps_stab").get<double>();
    ck.rng_seed = j.at("rng").at("seed").get<uint64_t>();
    ck.rng_position = j.at("rng").at("position").get<uint64_t>();
    return ck;
}

MatNtmModel LoadedCheckpoint::instantiate() const {
    SeededRng rng(0);
    MatNtmModel model(model_config, rng);
    for (auto& p : model.params()) {
        auto it = std::find_if(params.begin(), params.end(),
                               [&](const ParamInfo& q) { return q.name == p.name; });
        if (it == params.end())
            throw_error(ErrorCode::ConfigError, "checkpoint: missing parameter " + p.name);
        if (!it->value.same_shape(p.value))
            throw_error(ErrorCode::ConfigError, "checkpoint: shape mismatch for " + p.name);
        p.value = it->value;
    }
    return model;
}

std::string task_name(TaskKind kind) { return kind == TaskKind::Copy ? "copy" : "recall"; }

TaskKind parse_task(const std::string& name) {
    if (name == "copy") return TaskKind::Copy;
    if (name == "recall") return TaskKind::AssociativeRecall;
    throw_error(ErrorCode::ConfigError, "unknown task '" + name + "'");
}

}  // namespace matcap
