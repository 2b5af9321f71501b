#ifndef ACCSTEER_REPORT_HPP
#define ACCSTEER_REPORT_HPP

// Summary tables over finished sweeps and profiles. Formatting only.

#include "accsteer/error.hpp"
#include "accsteer/sensitivity.hpp"
#include "accsteer/steering.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace accsteer {

/// One accent's base and steered WER, in percent.
struct SummaryRow {
    std::string accent;
    double base_pct = 0.0;
    double steered_pct = 0.0;
    std::optional<double> stored_delta_pct; // as given in an input table
    std::optional<std::size_t> layer;
    std::optional<double> alpha;

    double delta_pct() const { return steered_pct - base_pct; }
};

inline constexpr double kDeltaTolerancePct = 0.01;

inline std::string format_pct(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f%%", v);
    return buf;
}

inline std::string format_delta_pct(double v) {
    // Keep "-0.00" from showing up for tiny negative rounding noise.
    if (std::fabs(v) < 0.005)
        v = 0.0;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%+.2f%%", v);
    std::string s = buf;
    if (s.front() == '+' && v == 0.0)
        s.erase(0, 1);
    return s;
}

/// Throws if a stored delta disagrees with steered - base.
inline void check_row(const SummaryRow& r) {
    if (!std::isfinite(r.base_pct) || !std::isfinite(r.steered_pct) || r.base_pct < 0 || r.steered_pct < 0)
        throw ValidationError("row '" + r.accent + "' has an invalid WER");
    if (r.stored_delta_pct && std::fabs(*r.stored_delta_pct - r.delta_pct()) > kDeltaTolerancePct + 1e-9)
        throw ValidationError("row '" + r.accent + "': stored delta " + format_delta_pct(*r.stored_delta_pct) +
                              " does not match steered - base = " + format_delta_pct(r.delta_pct()));
}

/// Best cell of a grid (lowest delta WER; earlier cells win ties) as a row.
inline SummaryRow summary_row(const SweepGrid& g) {
    if (g.cells.empty())
        throw ValidationError("sweep grid for '" + g.accent + "' has no cells");
    const SweepCell* best = &g.cells.front();
    for (const auto& c : g.cells)
        if (c.delta_wer < best->delta_wer)
            best = &c;
    SummaryRow r;
    r.accent = g.accent;
    r.base_pct = 100.0 * best->wer_base;
    r.steered_pct = 100.0 * best->wer_steered;
    r.layer = best->layer;
    r.alpha = best->alpha;
    return r;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
        if (!f.empty() && f.back() == '%')
            f.pop_back();
    }
    return out;
}

inline double parse_number(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size())
            throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw FormatError("cannot parse " + what + " '" + s + "'");
    }
}

} // namespace detail

/// Summary rows from CSV: header `accent,base,steered[,delta]`, values in
/// percent (a trailing '%' is accepted).
inline std::vector<SummaryRow> parse_summary_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw ValidationError("summary table is empty");
    const auto header = detail::split_csv_line(line);
    if (header.size() < 3 || header[0] != "accent" || header[1] != "base" || header[2] != "steered" ||
        (header.size() >= 4 && header[3] != "delta"))
        throw FormatError("summary table header must be 'accent,base,steered[,delta]'");
    std::vector<SummaryRow> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r")
            continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != header.size())
            throw FormatError("summary row has " + std::to_string(f.size()) + " fields, expected " +
                              std::to_string(header.size()));
        SummaryRow r;
        r.accent = f[0];
        r.base_pct = detail::parse_number(f[1], "base WER");
        r.steered_pct = detail::parse_number(f[2], "steered WER");
        if (f.size() >= 4)
            r.stored_delta_pct = detail::parse_number(f[3], "delta");
        check_row(r);
        rows.push_back(std::move(r));
    }
    if (rows.empty())
        throw ValidationError("summary table has no rows");
    return rows;
}

inline std::string summary_markdown(const std::vector<SummaryRow>& rows) {
    if (rows.empty())
        throw ValidationError("nothing to report");
    bool with_cell = false;
    for (const auto& r : rows)
        with_cell = with_cell || r.layer.has_value();
    std::ostringstream os;
    os << "| Accent | Base WER | Steered WER | Δ |";
    if (with_cell)
        os << " Layer | Alpha |";
    os << "\n|---|---:|---:|---:|";
    if (with_cell)
        os << "---:|---:|";
    os << '\n';
    for (const auto& r : rows) {
        check_row(r);
        os << "| " << r.accent << " | " << format_pct(r.base_pct) << " | " << format_pct(r.steered_pct) << " | "
           << format_delta_pct(r.delta_pct()) << " |";
        if (with_cell) {
            os << ' ' << (r.layer ? std::to_string(*r.layer) : "") << " | ";
            if (r.alpha) {
                std::ostringstream a;
                a << *r.alpha;
                os << a.str();
            }
            os << " |";
        }
        os << '\n';
    }
    return os.str();
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::ostringstream os;
    os << "accent,base,steered,delta\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, ",%.2f,%.2f,%.2f\n", r.base_pct, r.steered_pct, r.delta_pct());
        os << r.accent << buf;
    }
    return os.str();
}

inline std::string profile_markdown(const SensitivityProfile& p) {
    std::ostringstream os;
    os << "### " << p.accent << "\n\n| Layer | Band | Cross AAS | Within AAS | Specificity | Normalized |\n"
       << "|---:|---|---:|---:|---:|---:|\n";
    char buf[256];
    for (const auto& l : p.layers) {
        if (l.excluded) {
            os << "| " << l.layer << " | excluded | | | | |\n";
            continue;
        }
        std::snprintf(buf, sizeof buf, "| %zu | %s | %.6f | %.6f | %.6f | %.3f |\n", l.layer, to_string(l.band),
                      l.mean_aas_cross, l.mean_aas_within, l.specificity, l.normalized_sensitivity);
        os << buf;
    }
    if (auto best = p.argmax_layer())
        os << "\nTop layer: " << *best << " (" << to_string(p.layers[*best].band) << ")\n";
    if (p.all_zero)
        os << "\nNo layer shows positive specificity.\n";
    else if (p.degenerate_range)
        os << "\nAll included layers have the same sensitivity.\n";
    return os.str();
}

inline std::string band_table_markdown(const std::string& accent, const std::vector<BandSummary>& rows) {
    std::ostringstream os;
    os << "### " << accent << " mean ΔWER by band\n\n| Band | Alpha | Mean ΔWER (pp) | Cells |\n|---|---:|---:|---:|\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "| %s | %g | %+.2f | %zu |\n", to_string(r.band), r.alpha,
                      100.0 * r.mean_delta_wer, r.n_cells);
        os << buf;
    }
    return os.str();
}

} // namespace accsteer

#endif // ACCSTEER_REPORT_HPP
