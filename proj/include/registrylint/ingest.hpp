#pragma once

#include "registrylint/data_model.hpp"
#include "registrylint/geo.hpp"

#include <filesystem>
#include <istream>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace registrylint {

struct RuleConfig;

/// Fatal input problem: missing file, header or mandatory column, malformed boundary file.
class IngestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One raw column mapped onto a canonical field: canonical = raw * factor.
///
/// Besides the catalog fields, `field` may be "latitude" or "longitude"; the pair
/// fills `coordinate`. A mandatory column must be present in the header.
struct MappingEntry {
    std::string column;
    std::string field;
    double factor = 1.0;
    bool mandatory = false;
};

class ColumnMapping {
public:
    explicit ColumnMapping(Technology technology);

    /// Raw column names of the registry export, one entry per analysed column.
    static ColumnMapping defaults(Technology technology);

    Technology technology() const { return technology_; }
    const std::vector<MappingEntry>& entries() const { return entries_; }

    /// Replaces the entry with the same canonical field, or appends.
    void set(MappingEntry entry);
    /// Drops the entry for a canonical field; false when there was none.
    bool remove(std::string_view field);
    const MappingEntry* find(std::string_view field) const;

    /// Throws IngestError when a field is unknown or absent from the technology, a field is mapped
    /// twice, a factor is not positive and finite or applied to a non-decimal field, or a field
    /// read by the enabled tests is not covered.
    void validate(const RuleConfig& config) const;

private:
    Technology technology_;
    std::vector<MappingEntry> entries_;
};

struct IngestOptions {
    char delimiter = ',';
    std::size_t chunk_size = 50'000;
    /// Optional raw column naming the registry table of each row; a row of another table is fatal.
    std::string table_column = "unit_table";
};

/// A row-level problem. `rejected` rows produced no record; the others produced a record with
/// the offending cell set to null.
struct ParseIssue {
    std::size_t line = 0;
    std::string column;
    std::string reason;
    bool rejected = false;

    bool operator==(const ParseIssue&) const = default;
};

/// Streaming reader over one per-technology CSV export.
class RegistryReader {
public:
    /// Reads and checks the header. Throws IngestError on a missing header or mandatory column.
    RegistryReader(std::istream& in, ColumnMapping mapping, IngestOptions options = {});
    ~RegistryReader();
    RegistryReader(const RegistryReader&) = delete;
    RegistryReader& operator=(const RegistryReader&) = delete;

    /// Replaces `records` with up to chunk_size records and appends row issues.
    /// Returns false once the input is exhausted and nothing was read.
    bool next_chunk(std::vector<UnitRecord>& records, std::vector<ParseIssue>& issues);

    /// Optional mapped columns that the header lacks; their fields stay null.
    const std::vector<std::string>& absent_columns() const;
    std::size_t rows() const;
    std::size_t rejected_rows() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct RegistryTable {
    std::vector<UnitRecord> records;
    std::vector<ParseIssue> issues;
    std::size_t rows = 0;
    std::size_t rejected_rows = 0;
};

RegistryTable parse_registry(std::istream& in, const ColumnMapping& mapping, const IngestOptions& options = {});
RegistryTable parse_registry(const std::filesystem::path& file, const ColumnMapping& mapping,
                             const IngestOptions& options = {});

/// Writes records with the mapping's raw column names, dividing by each factor.
void write_registry(std::ostream& out, std::span<const UnitRecord> records, const ColumnMapping& mapping,
                    char delimiter = ',');

/// Parses numbers written with either decimal point or decimal comma ("1.234,5", "1,5", "1234.5").
/// When both separators occur the last one is the decimal separator.
std::optional<double> parse_decimal(std::string_view text);

struct BoundaryOptions {
    /// Region-key property; empty selects "krs" for districts and "ags" for municipalities.
    std::string key_property;
    std::string name_property = "gen";
};

/// Reads a GeoJSON FeatureCollection of Polygon / MultiPolygon features.
/// District keys fall back to the first five digits of "ags" when "krs" is absent.
geo::BoundarySet parse_boundaries(std::istream& in, geo::BoundaryLevel level, const BoundaryOptions& options = {});
geo::BoundarySet parse_boundaries(const std::filesystem::path& file, geo::BoundaryLevel level,
                                  const BoundaryOptions& options = {});

/// GeoJSON FeatureCollection with the key under "ags" (municipalities) or "krs" (districts).
void write_boundaries(std::ostream& out, const geo::BoundarySet& boundaries);

} // namespace registrylint
