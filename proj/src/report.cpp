#include "evogan/report.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace evogan {

namespace fs = std::filesystem;

const std::vector<std::string> &metrics_columns() {
  static const std::vector<std::string> columns{"epoch", "g_loss", "d_loss", "fid", "ga_best_fitness", "wall_time"};
  return columns;
}

namespace {

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string optional_number(const std::optional<double> &v) { return v ? number(*v) : std::string(); }

std::vector<std::string> split(const std::string &line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) {
    if (!cell.empty() && cell.back() == '\r') {
      cell.pop_back();
    }
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == sep) {
    out.emplace_back();
  }
  return out;
}

double parse_number(const std::string &text, const std::string &column, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw ReportError("column '" + column + "' on line " + std::to_string(line) + " is not a number: '" + text + "'");
  }
  return v;
}

void write_text(const fs::path &path, const std::string &text) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) {
      throw ReportError("cannot write " + tmp.string());
    }
    os << text;
  }
  fs::rename(tmp, path);
}

// Chart rendering.

const std::vector<cv::Scalar> &palette() {
  static const std::vector<cv::Scalar> colors{{180, 119, 31}, {14, 127, 255}, {44, 160, 44},  {40, 39, 214},
                                              {189, 103, 148}, {75, 86, 140},  {194, 119, 227}, {127, 127, 127},
                                              {34, 189, 188}};
  return colors;
}

struct Line {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

std::string tick_label(double v) {
  char buf[32];
  if (std::abs(v) >= 1000 || (std::abs(v) < 0.01 && v != 0.0)) {
    std::snprintf(buf, sizeof buf, "%.2g", v);
  } else {
    std::snprintf(buf, sizeof buf, "%.4g", v);
  }
  return buf;
}

void render_chart(const fs::path &path, const std::string &title, const std::string &x_label,
                  const std::string &y_label, const std::vector<Line> &lines) {
  constexpr int width = 960;
  constexpr int height = 600;
  constexpr int left = 90;
  constexpr int right = 220;
  constexpr int top = 50;
  constexpr int bottom = 70;
  double x0 = std::numeric_limits<double>::infinity();
  double x1 = -x0;
  double y0 = x0;
  double y1 = -x0;
  for (const auto &l : lines) {
    for (std::size_t i = 0; i < l.x.size(); ++i) {
      if (std::isfinite(l.y[i])) {
        x0 = std::min(x0, l.x[i]);
        x1 = std::max(x1, l.x[i]);
        y0 = std::min(y0, l.y[i]);
        y1 = std::max(y1, l.y[i]);
      }
    }
  }
  if (!std::isfinite(x0)) {
    throw ReportError("nothing to plot for " + path.filename().string());
  }
  if (x1 == x0) {
    x1 = x0 + 1.0;
  }
  const double pad = y1 > y0 ? 0.05 * (y1 - y0) : std::max(1.0, std::abs(y0) * 0.1);
  y0 -= pad;
  y1 += pad;

  cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  const int pw = width - left - right;
  const int ph = height - top - bottom;
  auto px = [&](double x) { return left + static_cast<int>(std::lround((x - x0) / (x1 - x0) * pw)); };
  auto py = [&](double y) { return top + ph - static_cast<int>(std::lround((y - y0) / (y1 - y0) * ph)); };
  const auto font = cv::FONT_HERSHEY_SIMPLEX;
  const cv::Scalar ink(40, 40, 40);
  const cv::Scalar grid(225, 225, 225);

  for (int t = 0; t <= 5; ++t) {
    const double yv = y0 + (y1 - y0) * t / 5.0;
    const double xv = x0 + (x1 - x0) * t / 5.0;
    cv::line(img, {left, py(yv)}, {left + pw, py(yv)}, grid, 1);
    cv::line(img, {px(xv), top}, {px(xv), top + ph}, grid, 1);
    cv::putText(img, tick_label(yv), {8, py(yv) + 5}, font, 0.45, ink, 1, cv::LINE_AA);
    cv::putText(img, tick_label(xv), {px(xv) - 15, top + ph + 22}, font, 0.45, ink, 1, cv::LINE_AA);
  }
  cv::rectangle(img, {left, top}, {left + pw, top + ph}, ink, 1);
  cv::putText(img, title, {left, 32}, font, 0.7, ink, 1, cv::LINE_AA);
  cv::putText(img, x_label, {left + pw / 2 - 20, height - 20}, font, 0.55, ink, 1, cv::LINE_AA);
  cv::putText(img, y_label, {8, top - 12}, font, 0.5, ink, 1, cv::LINE_AA);

  for (std::size_t k = 0; k < lines.size(); ++k) {
    const auto &color = palette()[k % palette().size()];
    std::vector<cv::Point> pts;
    for (std::size_t i = 0; i < lines[k].x.size(); ++i) {
      if (std::isfinite(lines[k].y[i])) {
        pts.emplace_back(px(lines[k].x[i]), py(lines[k].y[i]));
      }
    }
    if (pts.size() == 1) {
      cv::circle(img, pts[0], 3, color, cv::FILLED, cv::LINE_AA);
    } else {
      cv::polylines(img, pts, false, color, 2, cv::LINE_AA);
    }
    const int ly = top + 20 + static_cast<int>(k) * 24;
    cv::line(img, {left + pw + 15, ly - 5}, {left + pw + 45, ly - 5}, color, 3, cv::LINE_AA);
    cv::putText(img, lines[k].label, {left + pw + 52, ly}, font, 0.45, ink, 1, cv::LINE_AA);
  }

  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  if (!cv::imwrite(path.string(), img)) {
    throw ReportError("cannot write " + path.string());
  }
}

std::vector<int> fid_epochs(const Series &s) {
  std::vector<int> out;
  for (const auto &r : s.records) {
    if (r.fid) {
      out.push_back(r.epoch);
    }
  }
  return out;
}

std::vector<double> fid_values(const Series &s) {
  std::vector<double> out;
  for (const auto &r : s.records) {
    if (r.fid) {
      out.push_back(*r.fid);
    }
  }
  return out;
}

std::string file_label(const std::string &label) {
  std::string out = label;
  for (char &c : out) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) {
      c = '_';
    }
  }
  return out;
}

std::string run_label(const TrainingConfig &config) {
  return to_string(config.variant) + "_seed" + std::to_string(config.seed);
}

} // namespace

void write_metrics_csv(const fs::path &path, const std::vector<EpochRecord> &records) {
  std::ostringstream os;
  os << "# metrics_schema=" << kMetricsSchemaVersion << "\n";
  const auto &cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    os << (i ? "," : "") << cols[i];
  }
  os << "\n";
  for (const auto &r : records) {
    os << r.epoch << ',' << number(r.g_loss) << ',' << number(r.d_loss) << ',' << optional_number(r.fid) << ','
       << optional_number(r.ga_best_fitness) << ',' << number(r.wall_time) << "\n";
  }
  write_text(path, os.str());
}

std::vector<EpochRecord> read_metrics_csv(const fs::path &path) {
  std::ifstream is(path);
  if (!is) {
    throw ReportError("cannot open " + path.string());
  }
  std::string line;
  std::size_t line_no = 0;
  const std::string schema_prefix = "# metrics_schema=";
  std::vector<std::string> header;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.rfind(schema_prefix, 0) == 0) {
      if (line.substr(schema_prefix.size()) != std::to_string(kMetricsSchemaVersion)) {
        throw ReportError(path.string() + ": unsupported metrics schema '" + line.substr(schema_prefix.size()) +
                          "'");
      }
      continue;
    }
    if (line.empty() || line[0] == '#') {
      continue;
    }
    header = split(line, ',');
    break;
  }
  if (header.empty()) {
    throw ReportError(path.string() + " is empty");
  }
  const auto &cols = metrics_columns();
  for (std::size_t i = 0; i < std::max(cols.size(), header.size()); ++i) {
    if (i >= header.size()) {
      throw ReportError(path.string() + ": missing column '" + cols[i] + "'");
    }
    if (i >= cols.size()) {
      throw ReportError(path.string() + ": unexpected column '" + header[i] + "'");
    }
    if (header[i] != cols[i]) {
      throw ReportError(path.string() + ": column " + std::to_string(i + 1) + " is '" + header[i] + "', expected '" +
                        cols[i] + "'");
    }
  }
  std::vector<EpochRecord> out;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty() || line[0] == '#') {
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != cols.size()) {
      throw ReportError(path.string() + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                        " fields, expected " + std::to_string(cols.size()));
    }
    EpochRecord r;
    r.epoch = static_cast<int>(parse_number(cells[0], cols[0], line_no));
    r.g_loss = parse_number(cells[1], cols[1], line_no);
    r.d_loss = parse_number(cells[2], cols[2], line_no);
    if (!cells[3].empty()) {
      r.fid = parse_number(cells[3], cols[3], line_no);
    }
    if (!cells[4].empty()) {
      r.ga_best_fitness = parse_number(cells[4], cols[4], line_no);
    }
    r.wall_time = parse_number(cells[5], cols[5], line_no);
    if (!out.empty() && r.epoch <= out.back().epoch) {
      throw ReportError(path.string() + ": column 'epoch' is not increasing at line " + std::to_string(line_no));
    }
    out.push_back(r);
  }
  if (out.empty()) {
    throw ReportError(path.string() + " holds no records");
  }
  return out;
}

void plot_fid(const fs::path &path, const std::vector<Series> &runs) {
  std::vector<Line> lines;
  for (const auto &run : runs) {
    Line l{run.label, {}, {}};
    for (const auto &r : run.records) {
      if (r.fid) {
        l.x.push_back(r.epoch);
        l.y.push_back(*r.fid);
      }
    }
    lines.push_back(std::move(l));
  }
  render_chart(path, "FID through epochs", "epoch", "FID", lines);
}

void plot_losses(const fs::path &path, const Series &run) {
  Line g{"G loss", {}, {}};
  Line d{"D loss", {}, {}};
  for (const auto &r : run.records) {
    g.x.push_back(r.epoch);
    g.y.push_back(r.g_loss);
    d.x.push_back(r.epoch);
    d.y.push_back(r.d_loss);
  }
  render_chart(path, "Generator and discriminator loss: " + run.label, "epoch", "loss", {g, d});
}

std::vector<fs::path> plot_runs(const std::vector<fs::path> &metrics_csvs, const fs::path &out_dir) {
  if (metrics_csvs.empty()) {
    throw ReportError("plot: no metrics files given");
  }
  std::vector<Series> runs;
  std::map<std::string, int> seen;
  for (const auto &csv : metrics_csvs) {
    std::string label = csv.parent_path().filename().string();
    if (label.empty()) {
      label = csv.stem().string();
    }
    if (seen[label]++ > 0) {
      label += "_" + std::to_string(seen[label]);
    }
    runs.push_back({label, read_metrics_csv(csv)});
  }
  std::vector<fs::path> written;
  bool any_fid = false;
  for (const auto &run : runs) {
    any_fid = any_fid || !fid_epochs(run).empty();
  }
  if (any_fid) {
    written.push_back(out_dir / "fid_comparison.png");
    plot_fid(written.back(), runs);
  }
  for (const auto &run : runs) {
    written.push_back(out_dir / ("loss_" + file_label(run.label) + ".png"));
    plot_losses(written.back(), run);
  }
  return written;
}

Comparison compare_series(const std::vector<Series> &runs, std::size_t convergence_window, double tolerance,
                          const std::string &baseline_label) {
  if (runs.empty()) {
    throw ReportError("compare: no runs given");
  }
  const auto epochs = fid_epochs(runs.front());
  for (const auto &run : runs) {
    if (fid_epochs(run) != epochs) {
      throw ReportError("compare: run '" + run.label + "' evaluated FID at different epochs than '" +
                        runs.front().label + "'");
    }
  }
  Comparison out;
  out.runs = runs;
  out.effective_window = epochs.size() > 1 ? std::min(convergence_window, epochs.size() - 1) : 0;
  for (const auto &run : runs) {
    VariantSummary s;
    s.label = run.label;
    const auto values = fid_values(run);
    if (!values.empty()) {
      s.starting_fid = values.front();
      s.final_fid = values.back();
    }
    if (out.effective_window > 0) {
      const auto ce = convergence_epoch(epochs, values, out.effective_window, tolerance);
      s.convergence_epoch = ce.epoch;
      s.converged = ce.converged;
    }
    out.summaries.push_back(s);
  }
  const VariantSummary *base = nullptr;
  for (const auto &s : out.summaries) {
    if (baseline_label.empty() ? s.label.rfind(to_string(Variant::baseline_infogan), 0) == 0
                               : s.label == baseline_label) {
      base = &s;
      break;
    }
  }
  if (base != nullptr) {
    const auto reduction = [](const std::optional<double> &b, const std::optional<double> &v) -> std::optional<double> {
      if (!b || !v || *b == 0.0) {
        return std::nullopt;
      }
      return (*b - *v) / *b;
    };
    const VariantSummary baseline = *base;
    for (auto &s : out.summaries) {
      s.final_reduction = reduction(baseline.final_fid, s.final_fid);
      s.starting_reduction = reduction(baseline.starting_fid, s.starting_fid);
    }
  }
  return out;
}

std::vector<fs::path> write_comparison(const Comparison &comparison, const fs::path &out_dir) {
  std::vector<fs::path> written;
  {
    std::ostringstream os;
    os << "epoch";
    for (const auto &run : comparison.runs) {
      os << ',' << run.label;
    }
    os << "\n";
    const auto epochs = fid_epochs(comparison.runs.front());
    std::vector<std::vector<double>> values;
    for (const auto &run : comparison.runs) {
      values.push_back(fid_values(run));
    }
    for (std::size_t i = 0; i < epochs.size(); ++i) {
      os << epochs[i];
      for (const auto &v : values) {
        os << ',' << number(v[i]);
      }
      os << "\n";
    }
    written.push_back(out_dir / "fid_series.csv");
    write_text(written.back(), os.str());
  }
  {
    std::ostringstream os;
    os << "# convergence_window=" << comparison.effective_window << "\n";
    os << "label,starting_fid,final_fid,convergence_epoch,converged,final_fid_reduction,starting_fid_reduction\n";
    for (const auto &s : comparison.summaries) {
      os << s.label << ',' << optional_number(s.starting_fid) << ',' << optional_number(s.final_fid) << ','
         << (s.convergence_epoch ? std::to_string(*s.convergence_epoch) : std::string()) << ','
         << (s.converged ? "true" : "false") << ',' << optional_number(s.final_reduction) << ','
         << optional_number(s.starting_reduction) << "\n";
    }
    written.push_back(out_dir / "summary.csv");
    write_text(written.back(), os.str());
  }
  if (!fid_epochs(comparison.runs.front()).empty()) {
    written.push_back(out_dir / "fid_comparison.png");
    plot_fid(written.back(), comparison.runs);
  }
  return written;
}

Comparison compare_runs(const std::vector<fs::path> &run_dirs) {
  if (run_dirs.empty()) {
    throw ReportError("compare: no runs given");
  }
  std::vector<Series> runs;
  std::vector<TrainingConfig> configs;
  std::map<std::string, int> seen;
  for (const auto &dir : run_dirs) {
    const auto config = load_config(dir / "config.resolved.cfg");
    if (!configs.empty() && config.fid_interval != configs.front().fid_interval) {
      throw ReportError("compare: fid_interval " + std::to_string(config.fid_interval) + " of " + dir.string() +
                        " differs from " + std::to_string(configs.front().fid_interval));
    }
    std::string label = run_label(config);
    if (seen[label]++ > 0) {
      label += "_" + dir.filename().string();
    }
    runs.push_back({label, read_metrics_csv(dir / "metrics.csv")});
    configs.push_back(config);
  }
  return compare_series(runs, static_cast<std::size_t>(configs.front().convergence_window),
                        configs.front().convergence_tolerance);
}

Comparison compare_variants(const std::vector<TrainingConfig> &configs, const fs::path &out_dir,
                            bool use_stats_cache) {
  if (configs.empty()) {
    throw ReportError("compare: no configs given");
  }
  const auto normalized = [&](TrainingConfig c) {
    c.variant = configs.front().variant;
    c.seed = configs.front().seed;
    return to_ini(c);
  };
  const std::string reference = normalized(configs.front());
  for (const auto &c : configs) {
    if (c.fid_interval != configs.front().fid_interval) {
      throw ReportError("compare: fid_interval differs across configs");
    }
    if (normalized(c) != reference) {
      throw ReportError("compare: configs may differ only in variant and seed");
    }
  }
  std::vector<Series> runs;
  for (const auto &c : configs) {
    TrainOptions options;
    options.out_dir = out_dir / run_label(c);
    options.use_stats_cache = use_stats_cache;
    runs.push_back({run_label(c), train(c, options).records});
  }
  auto comparison = compare_series(runs, static_cast<std::size_t>(configs.front().convergence_window),
                                   configs.front().convergence_tolerance);
  write_comparison(comparison, out_dir);
  return comparison;
}

} // namespace evogan
