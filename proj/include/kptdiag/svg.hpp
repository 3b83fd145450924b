#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace kptdiag::svg {

// All numbers are rendered through std::to_chars with a fixed precision, so a
// plot built from the same values is byte-identical run to run. No timestamps,
// no locale, no external resources.

namespace detail {

inline std::string fmt(double v, int precision = 2) {
    if (std::isnan(v)) return "0";
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                   std::chars_format::fixed, precision);
    if (ec != std::errc{}) return "0";
    std::string s(buf.data(), ptr);
    // trim trailing zeros after the point to keep files compact
    if (s.find('.') != std::string::npos) {
        std::size_t last = s.find_last_not_of('0');
        if (s[last] == '.') --last;
        s.erase(last + 1);
    }
    return s;
}

inline std::string escape(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace detail

inline constexpr std::array<const char*, 10> kPalette = {
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2",
    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};

/// Minimal element-by-element SVG writer. Coordinates are in user units;
/// callers lay out charts themselves.
class Canvas {
  public:
    Canvas(double width, double height) : w_(width), h_(height) {
        body_ += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::fmt(w_, 0) +
                 "\" height=\"" + detail::fmt(h_, 0) + "\" viewBox=\"0 0 " + detail::fmt(w_, 0) +
                 ' ' + detail::fmt(h_, 0) + "\">\n";
        rect(0, 0, w_, h_, "#ffffff");
    }

    double width() const { return w_; }
    double height() const { return h_; }

    void rect(double x, double y, double w, double h, const std::string& fill,
              const std::string& stroke = "", double opacity = 1.0) {
        body_ += "<rect x=\"" + detail::fmt(x) + "\" y=\"" + detail::fmt(y) + "\" width=\"" +
                 detail::fmt(std::max(0.0, w)) + "\" height=\"" + detail::fmt(std::max(0.0, h)) +
                 "\" fill=\"" + fill + '"';
        if (!stroke.empty()) body_ += " stroke=\"" + stroke + "\" stroke-width=\"1\"";
        if (opacity < 1.0) body_ += " fill-opacity=\"" + detail::fmt(opacity) + '"';
        body_ += "/>\n";
    }

    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double width = 1.0) {
        body_ += "<line x1=\"" + detail::fmt(x1) + "\" y1=\"" + detail::fmt(y1) + "\" x2=\"" +
                 detail::fmt(x2) + "\" y2=\"" + detail::fmt(y2) + "\" stroke=\"" + stroke +
                 "\" stroke-width=\"" + detail::fmt(width) + "\"/>\n";
    }

    void circle(double cx, double cy, double r, const std::string& fill,
                const std::string& stroke = "") {
        body_ += "<circle cx=\"" + detail::fmt(cx) + "\" cy=\"" + detail::fmt(cy) + "\" r=\"" +
                 detail::fmt(r) + "\" fill=\"" + fill + '"';
        if (!stroke.empty()) body_ += " stroke=\"" + stroke + '"';
        body_ += "/>\n";
    }

    /// points as (x, y) pairs; closed=false emits a polyline, closed=true a filled polygon
    void poly(const std::vector<std::pair<double, double>>& points, const std::string& color,
              bool closed, double opacity = 1.0, double stroke_width = 1.5) {
        if (points.empty()) return;
        body_ += closed ? "<polygon points=\"" : "<polyline points=\"";
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (i) body_ += ' ';
            body_ += detail::fmt(points[i].first) + ',' + detail::fmt(points[i].second);
        }
        if (closed)
            body_ += "\" fill=\"" + color + "\" fill-opacity=\"" + detail::fmt(opacity) + "\"/>\n";
        else
            body_ += "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" +
                     detail::fmt(stroke_width) + "\"/>\n";
    }

    void path(const std::string& d, const std::string& fill, const std::string& stroke = "") {
        body_ += "<path d=\"" + d + "\" fill=\"" + fill + '"';
        if (!stroke.empty()) body_ += " stroke=\"" + stroke + '"';
        body_ += "/>\n";
    }

    void text(double x, double y, const std::string& s, double size = 12.0,
              const std::string& anchor = "start", const std::string& fill = "#333333",
              bool bold = false) {
        body_ += "<text x=\"" + detail::fmt(x) + "\" y=\"" + detail::fmt(y) +
                 "\" font-family=\"sans-serif\" font-size=\"" + detail::fmt(size) +
                 "\" text-anchor=\"" + anchor + "\" fill=\"" + fill + '"';
        if (bold) body_ += " font-weight=\"bold\"";
        body_ += '>' + detail::escape(s) + "</text>\n";
    }

    std::string finish() const { return body_ + "</svg>\n"; }

  private:
    double w_, h_;
    std::string body_;
};

/// Linear data->pixel mapping for one axis.
struct Scale {
    double lo = 0.0, hi = 1.0;      // data range
    double px0 = 0.0, px1 = 1.0;    // pixel range (px1 < px0 flips the axis)

    double operator()(double v) const {
        if (hi == lo) return px0;
        return px0 + (v - lo) / (hi - lo) * (px1 - px0);
    }
};

struct PlotFrame {
    double x0, y0, x1, y1;  // inner plotting rectangle
    Scale x, y;
};

/// Draws title, axes box, ticks and labels; returns the inner frame.
inline PlotFrame axes(Canvas& c, const std::string& title, const std::string& x_label,
                      const std::string& y_label, double x_lo, double x_hi, double y_lo,
                      double y_hi, int ticks = 5) {
    const double x0 = 62, y0 = 46, x1 = c.width() - 20, y1 = c.height() - 44;
    c.text(c.width() / 2, 24, title, 14, "middle", "#111111", true);
    c.rect(x0, y0, x1 - x0, y1 - y0, "none", "#888888");
    PlotFrame f{x0, y0, x1, y1, Scale{x_lo, x_hi, x0, x1}, Scale{y_lo, y_hi, y1, y0}};
    for (int i = 0; i <= ticks; ++i) {
        const double tx = x_lo + (x_hi - x_lo) * i / ticks;
        const double ty = y_lo + (y_hi - y_lo) * i / ticks;
        const double px = f.x(tx), py = f.y(ty);
        c.line(px, y1, px, y1 + 4, "#888888");
        c.text(px, y1 + 16, detail::fmt(tx), 10, "middle", "#555555");
        c.line(x0 - 4, py, x0, py, "#888888");
        c.text(x0 - 7, py + 3, detail::fmt(ty), 10, "end", "#555555");
    }
    c.text((x0 + x1) / 2, c.height() - 8, x_label, 11, "middle", "#555555");
    c.text(14, (y0 + y1) / 2, y_label, 11, "middle", "#555555");
    return f;
}

inline void legend_entry(Canvas& c, double x, double y, const std::string& color,
                         const std::string& label) {
    c.rect(x, y - 8, 10, 10, color);
    c.text(x + 14, y + 1, label, 10);
}

struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;  // data coordinates
};

/// Curves drawn back to front with the area between consecutive curves filled;
/// series order is bottom (first) to top (last).
inline std::string stacked_curves(const std::string& title, const std::string& x_label,
                                  const std::string& y_label,
                                  const std::vector<Series>& series, double width = 560,
                                  double height = 400) {
    Canvas c(width, height);
    PlotFrame f = axes(c, title, x_label, y_label, 0, 1, 0, 1);
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = kPalette[i % kPalette.size()];
        const auto& cur = series[i].points;
        if (cur.empty()) continue;
        std::vector<std::pair<double, double>> ring;
        for (const auto& [x, y] : cur) ring.emplace_back(f.x(x), f.y(y));
        if (i == 0) {
            ring.emplace_back(f.x(cur.back().first), f.y(0.0));
            ring.emplace_back(f.x(cur.front().first), f.y(0.0));
        } else {
            const auto& below = series[i - 1].points;
            for (auto it = below.rbegin(); it != below.rend(); ++it)
                ring.emplace_back(f.x(it->first), f.y(it->second));
        }
        c.poly(ring, color, true, 0.35);
        std::vector<std::pair<double, double>> linepts;
        for (const auto& [x, y] : cur) linepts.emplace_back(f.x(x), f.y(y));
        c.poly(linepts, color, false);
    }
    double ly = f.y0 + 14;
    for (std::size_t i = 0; i < series.size(); ++i) {
        legend_entry(c, f.x0 + 10, ly, kPalette[i % kPalette.size()], series[i].name);
        ly += 16;
    }
    return c.finish();
}

struct Slice {
    std::string label;
    double value = 0.0;
    std::string color;
};

inline std::string pie_chart(const std::string& title, const std::vector<Slice>& slices,
                             double width = 460, double height = 400) {
    Canvas c(width, height);
    c.text(width / 2, 24, title, 14, "middle", "#111111", true);
    const double cx = width * 0.38, cy = height / 2 + 10, r = std::min(width, height) * 0.30;
    double total = 0.0;
    for (const Slice& s : slices) total += std::max(0.0, s.value);
    std::vector<const Slice*> shown;
    for (const Slice& s : slices)
        if (s.value > 0.0) shown.push_back(&s);

    if (total <= 0.0 || shown.size() == 1) {
        const std::string color = shown.empty() ? std::string(kPalette[0]) : shown[0]->color;
        c.circle(cx, cy, r, color, "#ffffff");
    } else {
        double acc = 0.0;
        for (const Slice* s : shown) {
            const double a0 = acc / total * 2 * 3.141592653589793 - 1.5707963267948966;
            acc += s->value;
            const double a1 = acc / total * 2 * 3.141592653589793 - 1.5707963267948966;
            const int large = (a1 - a0) > 3.141592653589793 ? 1 : 0;
            std::string d = "M " + detail::fmt(cx) + ' ' + detail::fmt(cy) + " L " +
                            detail::fmt(cx + r * std::cos(a0)) + ' ' +
                            detail::fmt(cy + r * std::sin(a0)) + " A " + detail::fmt(r) + ' ' +
                            detail::fmt(r) + " 0 " + std::to_string(large) + " 1 " +
                            detail::fmt(cx + r * std::cos(a1)) + ' ' +
                            detail::fmt(cy + r * std::sin(a1)) + " Z";
            c.path(d, s->color, "#ffffff");
        }
    }
    double ly = 60;
    for (const Slice& s : slices) {
        const double pct = total > 0.0 ? s.value / total * 100.0 : (s.value > 0.0 ? 100.0 : 0.0);
        legend_entry(c, width * 0.72, ly, s.color, s.label + " " + detail::fmt(pct, 1) + "%");
        ly += 18;
    }
    return c.finish();
}

struct BarSeries {
    std::string name;
    std::string color;
    std::vector<double> values;  // one per category
};

/// Vertical stacked bars, one bar per category label.
inline std::string stacked_bars(const std::string& title, const std::string& y_label,
                                const std::vector<std::string>& categories,
                                const std::vector<BarSeries>& series, double width = 720,
                                double height = 420, bool normalize = false) {
    Canvas c(width, height);
    double max_total = 0.0;
    std::vector<double> totals(categories.size(), 0.0);
    for (std::size_t i = 0; i < categories.size(); ++i) {
        for (const BarSeries& s : series)
            if (i < s.values.size()) totals[i] += std::max(0.0, s.values[i]);
        max_total = std::max(max_total, totals[i]);
    }
    const double top = normalize ? 1.0 : (max_total > 0.0 ? max_total : 1.0);
    PlotFrame f = axes(c, title, "", y_label, 0, 1, 0, top);
    const double n = static_cast<double>(categories.size());
    const double slot = (f.x1 - f.x0) / std::max(1.0, n);
    const double bar = slot * 0.62;
    for (std::size_t i = 0; i < categories.size(); ++i) {
        const double denom = normalize && totals[i] > 0.0 ? totals[i] : 1.0;
        const double bx = f.x0 + slot * (static_cast<double>(i) + 0.5) - bar / 2;
        double acc = 0.0;
        for (const BarSeries& s : series) {
            const double v = i < s.values.size() ? std::max(0.0, s.values[i]) / denom : 0.0;
            if (v > 0.0) {
                const double y_lo_px = f.y(acc);
                const double y_hi_px = f.y(acc + v);
                c.rect(bx, y_hi_px, bar, y_lo_px - y_hi_px, s.color);
            }
            acc += v;
        }
        c.text(bx + bar / 2, f.y1 + 16, categories[i], 9, "middle", "#555555");
    }
    double ly = f.y0 + 14;
    for (const BarSeries& s : series) {
        legend_entry(c, f.x1 - 110, ly, s.color, s.name);
        ly += 16;
    }
    return c.finish();
}

struct HistSeries {
    std::string name;
    std::string color;
    std::vector<double> counts;
};

/// Bin-labelled histogram; several series overlap with transparency.
inline std::string histogram(const std::string& title, const std::string& x_label,
                             const std::vector<std::string>& bin_labels,
                             const std::vector<HistSeries>& series, double width = 640,
                             double height = 400) {
    Canvas c(width, height);
    double peak = 0.0;
    for (const HistSeries& s : series)
        for (double v : s.counts) peak = std::max(peak, v);
    PlotFrame f = axes(c, title, x_label, "count", 0, 1, 0, peak > 0.0 ? peak : 1.0);
    const double n = static_cast<double>(bin_labels.size());
    const double slot = (f.x1 - f.x0) / std::max(1.0, n);
    for (std::size_t i = 0; i < bin_labels.size(); ++i) {
        for (const HistSeries& s : series) {
            const double v = i < s.counts.size() ? s.counts[i] : 0.0;
            if (v <= 0.0) continue;
            const double bx = f.x0 + slot * static_cast<double>(i) + slot * 0.08;
            c.rect(bx, f.y(v), slot * 0.84, f.y(0) - f.y(v), s.color, "",
                   series.size() > 1 ? 0.55 : 0.9);
        }
        if (n <= 24 || i % 2 == 0)
            c.text(f.x0 + slot * (static_cast<double>(i) + 0.5), f.y1 + 16, bin_labels[i], 8,
                   "middle", "#555555");
    }
    double ly = f.y0 + 14;
    for (const HistSeries& s : series) {
        legend_entry(c, f.x1 - 150, ly, s.color, s.name);
        ly += 16;
    }
    return c.finish();
}

/// Grayscale intensity grid (row 0 at the top); values expected in [0,1].
inline std::string heatmap(const std::string& title, std::size_t rows, std::size_t cols,
                           const std::vector<double>& values, double width = 520,
                           double height = 560) {
    Canvas c(width, height);
    c.text(width / 2, 24, title, 14, "middle", "#111111", true);
    const double x0 = 30, y0 = 44;
    const double cell_w = (width - 60) / static_cast<double>(cols);
    const double cell_h = (height - 84) / static_cast<double>(rows);
    c.rect(x0, y0, cell_w * static_cast<double>(cols), cell_h * static_cast<double>(rows),
           "#000000");
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t col = 0; col < cols; ++col) {
            const double v = std::clamp(values[r * cols + col], 0.0, 1.0);
            if (v <= 0.0) continue;
            const int level = static_cast<int>(std::lround(v * 255.0));
            std::array<char, 8> hex{};
            static const char* digits = "0123456789abcdef";
            hex[0] = '#';
            hex[1] = digits[(level >> 4) & 0xF];
            hex[2] = digits[level & 0xF];
            hex[3] = hex[1]; hex[4] = hex[2];
            hex[5] = hex[1]; hex[6] = hex[2];
            c.rect(x0 + cell_w * static_cast<double>(col), y0 + cell_h * static_cast<double>(r),
                   cell_w + 0.5, cell_h + 0.5, std::string(hex.data(), 7));
        }
    }
    c.text(width / 2, height - 16, "normalized density (white = max)", 10, "middle", "#555555");
    return c.finish();
}

/// Matrix of labelled cells shaded by value (used for per-benchmark AP grids).
/// A negative value marks an empty cell.
inline std::string value_grid(const std::string& title,
                              const std::vector<std::string>& row_labels,
                              const std::vector<std::string>& col_labels,
                              const std::vector<double>& values, double width = 640,
                              double height = 420) {
    Canvas c(width, height);
    c.text(width / 2, 24, title, 14, "middle", "#111111", true);
    const double x0 = 120, y0 = 70;
    const double cw = (width - x0 - 24) / static_cast<double>(std::max<std::size_t>(1, col_labels.size()));
    const double ch = (height - y0 - 24) / static_cast<double>(std::max<std::size_t>(1, row_labels.size()));
    for (std::size_t j = 0; j < col_labels.size(); ++j)
        c.text(x0 + cw * (static_cast<double>(j) + 0.5), y0 - 10, col_labels[j], 11, "middle");
    for (std::size_t r = 0; r < row_labels.size(); ++r) {
        c.text(x0 - 8, y0 + ch * (static_cast<double>(r) + 0.5) + 4, row_labels[r], 11, "end");
        for (std::size_t j = 0; j < col_labels.size(); ++j) {
            const double v = values[r * col_labels.size() + j];
            std::string fill = "#dddddd";
            std::string label = "-";
            if (v >= 0.0) {
                const int g = 235 - static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 150.0));
                static const char* digits = "0123456789abcdef";
                const int blue = 255;
                std::string hex = "#";
                for (int comp : {g, g, blue}) {
                    hex += digits[(comp >> 4) & 0xF];
                    hex += digits[comp & 0xF];
                }
                fill = hex;
                label = detail::fmt(v, 3);
            }
            c.rect(x0 + cw * static_cast<double>(j) + 1, y0 + ch * static_cast<double>(r) + 1,
                   cw - 2, ch - 2, fill, "#aaaaaa");
            c.text(x0 + cw * (static_cast<double>(j) + 0.5),
                   y0 + ch * (static_cast<double>(r) + 0.5) + 4, label, 11, "middle", "#222222");
        }
    }
    return c.finish();
}

}  // namespace kptdiag::svg
