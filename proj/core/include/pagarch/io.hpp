#pragma once

// Long-format panel CSV, flat key = value configuration files and the JSON
// result document.

#include "pagarch/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace pagarch {

inline constexpr const char* kToolVersion = "0.1.0";

struct CsvSchema {
    std::string unit_column = "unit_id";
    std::string time_column = "time";
    std::string y_column = "y";
    // Every other column is a regressor, in header order.
};

struct IngestResult {
    PanelData panel;
    long long first_time = 0;  // time label of column 0
    std::vector<std::string> regressor_names;

    std::string summary() const;  // "N=.., T=.., D_x=.."
};

/// Units are sorted lexicographically and times ascending. Throws
/// ValidationError for missing cells (listing up to 20), duplicate
/// (unit, time) keys, non-numeric fields and malformed rows.
IngestResult read_panel_csv(std::istream& in, const CsvSchema& schema = {});
IngestResult read_panel_csv_file(const std::string& path, const CsvSchema& schema = {});

/// Long-format CSV with %.17g numbers; times are first_time, first_time + 1, ...
void write_panel_csv(std::ostream& out, const PanelData& panel, long long first_time = 1,
                     const std::vector<std::string>& regressor_names = {});
void write_panel_csv_file(const std::string& path, const PanelData& panel, long long first_time = 1,
                          const std::vector<std::string>& regressor_names = {});

/// %.17g
std::string format_double(double v);

/// "key = value" lines; '#' starts a comment. Duplicate keys and lines
/// without '=' throw ValidationError.
std::map<std::string, std::string> read_key_values(std::istream& in);
std::map<std::string, std::string> read_key_values_file(const std::string& path);

/// Throws ValidationError naming the first key not in `allowed`.
void reject_unknown_keys(const std::map<std::string, std::string>& kv, const std::set<std::string>& allowed,
                         const std::string& context);

struct IntervalRecord {
    double estimate = 0.0;
    double se = 0.0;
    double lower = 0.0;
    double upper = 0.0;

    friend bool operator==(const IntervalRecord&, const IntervalRecord&) = default;
};

struct FixedEffectRecord {
    std::string unit;
    IntervalRecord mu;
    IntervalRecord omega;
    IntervalRecord varpi;

    friend bool operator==(const FixedEffectRecord&, const FixedEffectRecord&) = default;
};

struct ResultDocument {
    std::string tool_version = kToolVersion;
    std::string command;
    std::uint64_t seed = 0;

    ModelOrders orders;
    int n_units = 0;
    int n_periods = 0;
    std::vector<std::string> unit_ids;

    std::vector<double> lambda;
    std::vector<double> lambda_se;
    std::vector<double> mu;
    std::vector<double> zeta;
    std::vector<double> zeta_se;
    std::vector<double> omega;
    std::vector<double> varpi;

    std::string correction_method;  // empty when uncorrected
    std::map<std::string, std::vector<double>> correction;
    std::map<std::string, double> diagnostics;

    double level = 0.0;
    std::vector<FixedEffectRecord> fixed_effects;

    friend bool operator==(const ResultDocument&, const ResultDocument&) = default;
};

/// JSON text; doubles are written in shortest round-trip form, non-finite
/// values as null (read back as NaN).
std::string to_json(const ResultDocument& doc);
ResultDocument result_from_json(const std::string& text);

std::vector<double> to_std(const Vector& v);
Vector to_eigen(const std::vector<double>& v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace pagarch
