#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "shallowblock/estimate.hpp"
#include "shallowblock/join.hpp"

namespace shallowblock {

// RFC 4180 rows: quoted fields may hold commas, doubled quotes and newlines.
// Accepts LF and CRLF line ends and strips a leading UTF-8 byte order mark.
std::vector<std::vector<std::string>> read_csv(std::istream& in);
std::vector<std::vector<std::string>> read_csv_file(const std::string& path);
std::string csv_escape(std::string_view field);

struct RecordTable {
  std::vector<std::string> ids;
  std::vector<std::string> texts;
  std::unordered_map<std::string, std::uint32_t> positions;

  std::size_t size() const { return ids.size(); }
  std::optional<std::uint32_t> find(const std::string& id) const;
};

// Text of a record is its text columns joined by single spaces; an empty
// `text_columns` selects every column except the id.
RecordTable ingest_csv(const std::string& path, const std::string& id_column,
                       const std::vector<std::string>& text_columns = {});
RecordTable make_table(std::vector<std::string> ids, std::vector<std::string> texts);

struct IdPair {
  std::string left;
  std::string right;
  double score = 0.0;
};

// Two-column files (left_id,right_id[,score]) with a header row.
std::vector<IdPair> read_id_pairs(const std::string& path);

// Resolves id pairs to record positions. Unknown ids raise DataError naming
// them, unless `unknown` is given, which then receives their count.
std::vector<KnownMatch> resolve_matches(const std::vector<IdPair>& pairs,
                                        const RecordTable& left,
                                        const RecordTable& right,
                                        std::size_t* unknown = nullptr);

std::string format_score(double score);

// Header left_id,right_id,score, rows in PairSet order, written to a
// temporary file next to `path` and renamed into place.
void write_pairs(const PairSet& pairs, const RecordTable& left,
                 const RecordTable& right, const std::string& path);

struct EvalReport {
  bool has_gold = false;  // recall is meaningful
  double recall = 0.0;
  std::uint64_t pairs = 0;
  double k_tilde = 0.0;
  std::uint64_t matches = 0;       // gold matches after exclusions
  std::uint64_t found = 0;
  std::uint64_t excluded_gold = 0;  // gold rows naming unknown ids
  double seconds = -1.0;           // -1 when unknown
  long peak_rss_kb = -1;           // approximate, -1 when unknown
  std::string metadata;            // run report JSON, if any

  std::string to_text() const;
};

// Recall |P n M| / |M| and k~ = |P| / min(|A|, |B|). With `dedup` both
// tables are the same and pairs match in either order.
EvalReport evaluate_pairs(const std::vector<IdPair>& pairs,
                          const std::vector<IdPair>& gold,
                          const RecordTable& left, const RecordTable& right,
                          bool dedup);

// Peak resident set size of this process in KiB, -1 if unavailable.
long peak_rss_kb();

}  // namespace shallowblock
