#include "fcadl/timeseries.hpp"

#include "fcadl/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string_view>

namespace fcadl {
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end) {
        return std::nullopt;
    }
    return v;
}

struct Cell {
    Timestamp timestamp;
    std::string service;
    double value;
};

Error parse_error(std::size_t line, const std::string& what) {
    return Error(Errc::parse, "line " + std::to_string(line) + ": " + what);
}

} // namespace

GapPolicy parse_gap_policy(const std::string& name) {
    if (name == "forward_fill") return GapPolicy::forward_fill;
    if (name == "zero_fill") return GapPolicy::zero_fill;
    if (name == "reject") return GapPolicy::reject;
    throw Error(Errc::config, "unknown gap policy '" + name + "'");
}

std::string to_string(GapPolicy policy) {
    switch (policy) {
    case GapPolicy::forward_fill: return "forward_fill";
    case GapPolicy::zero_fill: return "zero_fill";
    case GapPolicy::reject: return "reject";
    }
    return "forward_fill";
}

void MetricPanel::validate() const {
    if (sampling_period <= 0) {
        throw Error(Errc::contract, "sampling period must be positive");
    }
    for (std::size_t t = 1; t < timestamps.size(); ++t) {
        if (timestamps[t] - timestamps[t - 1] != sampling_period) {
            throw Error(Errc::contract, "timestamps not equally spaced at row " + std::to_string(t));
        }
    }
    if (static_cast<std::size_t>(values.rows()) != timestamps.size() ||
        static_cast<std::size_t>(values.cols()) != service_ids.size()) {
        throw Error(Errc::contract, "value matrix shape does not match timestamps x services");
    }
    std::set<std::string> unique(service_ids.begin(), service_ids.end());
    if (unique.size() != service_ids.size()) {
        throw Error(Errc::contract, "duplicate service ids");
    }
    if (!values.allFinite()) {
        throw Error(Errc::contract, "non-finite sample in panel");
    }
}

MetricPanel ingest_csv(const std::filesystem::path& path, GapPolicy policy) {
    std::ifstream in(path);
    if (!in) {
        throw Error(Errc::io, "cannot open '" + path.string() + "'");
    }
    return ingest_csv(in, policy);
}

MetricPanel ingest_csv(std::istream& in, GapPolicy policy) {
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    std::vector<Cell> cells;

    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = trim(line);
        if (row.empty() || row.front() == '#') {
            continue;
        }
        if (!have_header) {
            if (row != "timestamp,service,value") {
                throw parse_error(line_no, "expected header 'timestamp,service,value'");
            }
            have_header = true;
            continue;
        }
        const auto c1 = row.find(',');
        const auto c2 = c1 == std::string_view::npos ? c1 : row.find(',', c1 + 1);
        if (c2 == std::string_view::npos || row.find(',', c2 + 1) != std::string_view::npos) {
            throw parse_error(line_no, "expected 3 comma-separated fields");
        }
        const auto ts = parse_double(trim(row.substr(0, c1)));
        const auto service = trim(row.substr(c1 + 1, c2 - c1 - 1));
        const auto value = parse_double(trim(row.substr(c2 + 1)));
        if (!ts || !std::isfinite(*ts)) {
            throw parse_error(line_no, "invalid timestamp");
        }
        if (service.empty()) {
            throw parse_error(line_no, "empty service id");
        }
        if (!value || !std::isfinite(*value)) {
            throw parse_error(line_no, "invalid value");
        }
        cells.push_back({static_cast<Timestamp>(std::floor(*ts)), std::string(service), *value});
    }
    if (!have_header) {
        throw parse_error(line_no, "missing header");
    }

    std::set<Timestamp> stamp_set;
    std::set<std::string> service_set;
    for (const auto& c : cells) {
        stamp_set.insert(c.timestamp);
        service_set.insert(c.service);
    }
    if (stamp_set.size() < 2) {
        throw Error(Errc::alignment, "need at least 2 distinct timestamps to infer the sampling period");
    }

    const std::vector<Timestamp> stamps(stamp_set.begin(), stamp_set.end());
    Timestamp period = 0;
    for (std::size_t i = 1; i < stamps.size(); ++i) {
        period = std::gcd(period, stamps[i] - stamps[i - 1]);
    }
    // gcd of the gaps; any smaller positive gap implies a grid the data never fills.
    Timestamp min_gap = stamps[1] - stamps[0];
    for (std::size_t i = 2; i < stamps.size(); ++i) {
        min_gap = std::min(min_gap, stamps[i] - stamps[i - 1]);
    }
    if (period != min_gap) {
        throw Error(Errc::alignment, "timestamps do not lie on a uniform grid (smallest gap " +
                                         std::to_string(min_gap) + "s, common divisor " +
                                         std::to_string(period) + "s)");
    }

    MetricPanel panel;
    panel.sampling_period = period;
    panel.service_ids.assign(service_set.begin(), service_set.end());
    const Timestamp t0 = stamps.front();
    const auto rows = static_cast<std::size_t>((stamps.back() - t0) / period) + 1;
    panel.timestamps.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        panel.timestamps[r] = t0 + static_cast<Timestamp>(r) * period;
    }

    std::map<std::string, Eigen::Index> column;
    for (std::size_t s = 0; s < panel.service_ids.size(); ++s) {
        column[panel.service_ids[s]] = static_cast<Eigen::Index>(s);
    }
    const Eigen::Index n_rows = static_cast<Eigen::Index>(rows);
    const Eigen::Index n_cols = static_cast<Eigen::Index>(panel.service_ids.size());
    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(n_rows, n_cols);
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> present =
        Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n_rows, n_cols, false);
    for (const auto& c : cells) {
        const auto r = static_cast<Eigen::Index>((c.timestamp - t0) / period);
        const auto s = column.at(c.service);
        if (present(r, s)) {
            throw Error(Errc::parse, "duplicate sample for service '" + c.service + "' at timestamp " +
                                         std::to_string(c.timestamp));
        }
        values(r, s) = c.value;
        present(r, s) = true;
    }

    for (Eigen::Index s = 0; s < n_cols; ++s) {
        const auto& name = panel.service_ids[static_cast<std::size_t>(s)];
        Eigen::Index first = 0;
        while (!present(first, s)) {
            ++first;
        }
        if (first > 0) {
            // Leading cells of a late-starting service stay zero.
            panel.warnings.push_back("service '" + name + "' starts at " +
                                     std::to_string(panel.timestamps[static_cast<std::size_t>(first)]) +
                                     "; earlier samples zero-filled");
        }
        for (Eigen::Index r = first + 1; r < n_rows; ++r) {
            if (present(r, s)) {
                continue;
            }
            switch (policy) {
            case GapPolicy::forward_fill:
                values(r, s) = values(r - 1, s);
                break;
            case GapPolicy::zero_fill:
                values(r, s) = 0.0;
                break;
            case GapPolicy::reject:
                throw Error(Errc::gap, "service '" + name + "' has no sample at timestamp " +
                                           std::to_string(panel.timestamps[static_cast<std::size_t>(r)]));
            }
        }
    }
    panel.values = std::move(values);
    for (const auto& w : panel.warnings) {
        spdlog::warn("ingest: {}", w);
    }
    panel.validate();
    return panel;
}

DifferencedPanel difference(const MetricPanel& panel) {
    if (panel.rows() < 2) {
        throw Error(Errc::insufficient_data,
                    "differencing needs at least 2 rows, panel has " + std::to_string(panel.rows()));
    }
    DifferencedPanel out;
    out.service_ids = panel.service_ids;
    out.sampling_period = panel.sampling_period;
    out.timestamps.assign(panel.timestamps.begin() + 1, panel.timestamps.end());
    const Eigen::Index n = panel.values.rows() - 1;
    out.values = panel.values.bottomRows(n) - panel.values.topRows(n);
    return out;
}

void write_long_csv(const MetricPanel& panel, std::ostream& out) {
    out << "timestamp,service,value\n";
    char buf[64];
    for (std::size_t r = 0; r < panel.rows(); ++r) {
        for (std::size_t s = 0; s < panel.services(); ++s) {
            const double v = panel.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s));
            auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
            out << panel.timestamps[r] << ',' << panel.service_ids[s] << ',' << std::string_view(buf, end - buf)
                << '\n';
        }
    }
}

void write_wide_csv(const MetricPanel& panel, std::ostream& out) {
    out << "timestamp";
    for (const auto& id : panel.service_ids) {
        out << ',' << id;
    }
    out << '\n';
    char buf[64];
    for (std::size_t r = 0; r < panel.rows(); ++r) {
        out << panel.timestamps[r];
        for (std::size_t s = 0; s < panel.services(); ++s) {
            const double v = panel.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s));
            auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
            out << ',' << std::string_view(buf, end - buf);
        }
        out << '\n';
    }
}

} // namespace fcadl
