#pragma once

#include "gridmit/grid.hpp"
#include "gridmit/partition.hpp"

#include <map>
#include <utility>

namespace gridmit {

struct SchemaError : GridError {
    using GridError::GridError;
};
struct ValueError : GridError {
    using GridError::GridError;
};
struct ParseError : GridError {
    using GridError::GridError;
};
struct UnsupportedFeature : GridError {
    using GridError::GridError;
};

enum class ParseMode { Strict, Lenient };

/// In-memory form of the canonical JSON case format. All electrical values
/// are per unit; base_mva is carried as metadata for importers.
struct CaseDocument {
    int schema_version = 1;
    double base_mva = 100.0;
    std::string name;
    std::vector<Bus> buses;
    std::vector<Line> lines;

    // Optional partition block: external bus id -> area, plus switched-off
    // lines given as endpoint id pairs.
    std::map<int, int> partition_area_of;
    std::vector<std::pair<int, int>> partition_switched_off;
    bool has_partition() const { return !partition_area_of.empty(); }

    std::vector<std::string> warnings;          // lenient-mode notes
    std::vector<std::string> defaulted_fields;  // importer-filled dynamics params

    GridCase to_grid() const { return GridCase(buses, lines); }
};

CaseDocument parse_case_text(const std::string& text, ParseMode mode = ParseMode::Strict);
CaseDocument parse_case_file(const std::string& path, ParseMode mode = ParseMode::Strict);
std::string serialize_case(const CaseDocument& doc);
void write_case_file(const CaseDocument& doc, const std::string& path);

/// MATPOWER .m subset importer (mpc.baseMVA, mpc.bus, mpc.gen, mpc.branch,
/// optional mpc.gencost). One-way; dynamics parameters are defaulted and
/// recorded in `defaulted_fields`.
CaseDocument import_matpower_text(const std::string& text);
CaseDocument import_matpower(const std::string& path);

/// Loads a grid from .json (canonical) or .m (MATPOWER), by extension.
GridCase load_grid(const std::string& path, ParseMode mode = ParseMode::Strict);
CaseDocument load_case(const std::string& path, ParseMode mode = ParseMode::Strict);

/// Partition block <-> Partition, resolving external ids against the grid.
Partition partition_from_document(const GridCase& grid, const CaseDocument& doc);
void attach_partition(CaseDocument& doc, const GridCase& grid, const Partition& partition);

}  // namespace gridmit
