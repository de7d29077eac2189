#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "matcap/matntm.hpp"
#include "matcap/training.hpp"

namespace matcap {

/// Locale-independent shortest round-trip decimal rendering of a double.
std::string format_double(double v);

/// CSV accumulator with a frozen header; cells are written verbatim.
class CsvWriter {
  public:
    explicit CsvWriter(const std::string& header);
    void row(const std::vector<std::string>& cells);
    const std::string& text() const { return buf_; }
    void write_file(const std::string& path) const;

  private:
    std::string buf_;
    size_t columns_;
};

struct SvgSeries {
    std::vector<double> x, y;
    std::string color = "#1f6fb2";
    std::string label;
    bool dashed = false;
};

/// Minimal self-contained line plotter (axes, ticks, legend, optional log y).
class SvgPlot {
  public:
    SvgPlot(std::string title, std::string x_label, std::string y_label, bool log_y = false);
    void add(SvgSeries series);
    /// Chart group of the given size placed at (ox, oy) inside an <svg>.
    std::string render_group(double ox, double oy, double width, double height) const;

  private:
    std::string title_, x_label_, y_label_;
    bool log_y_;
    std::vector<SvgSeries> series_;
};

/// One SVG document with the given charts laid out left to right.
void write_svg_panels(const std::vector<SvgPlot>& panels, const std::string& path);

/// Flat key=value document ('#' comments); a leading '{' switches to a JSON object
/// of scalars. Unknown keys are rejected against the per-command schema.
class RunConfig {
  public:
    static RunConfig from_file(const std::string& path);
    static RunConfig from_text(const std::string& text);

    void require_known(const std::vector<std::string>& allowed) const;
    bool has(const std::string& key) const { return kv_.count(key) > 0; }
    std::optional<std::string> get(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;

  private:
    std::map<std::string, std::string> kv_;
};

std::string encode_base64(const unsigned char* data, size_t len);
std::vector<unsigned char> decode_base64(const std::string& text);

struct LoadedCheckpoint {
    int format_version = 1;
    int iteration = 0;
    TrainConfig train_config;
    MatNtmConfig model_config;
    std::vector<ParamInfo> params;
    OptimizerState optimizer;
    uint64_t rng_seed = 0;
    uint64_t rng_position = 0;

    MatNtmModel instantiate() const;
};

/// Base64 row-major little-endian float64 payloads inside a JSON document; the byte
/// content is a pure function of the model/optimizer state (no timestamps).
void save_checkpoint(const std::string& path, const MatNtmModel& model, const TrainConfig& config,
                     const OptimizerState& opt, uint64_t rng_seed, uint64_t rng_position,
                     int iteration);
LoadedCheckpoint load_checkpoint(const std::string& path);

std::string task_name(TaskKind kind);
TaskKind parse_task(const std::string& name);

}  // namespace matcap
