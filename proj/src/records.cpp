#include "shallowblock/records.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

#include "shallowblock/errors.hpp"

namespace shallowblock {

std::vector<std::vector<std::string>> read_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t i = 0;
  if (data.compare(0, 3, "\xEF\xBB\xBF") == 0) i = 3;

  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;  // current row has content
  for (; i < data.size(); ++i) {
    const char c = data[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < data.size() && data[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        any = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        if (any || !field.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        row.clear();
        field.clear();
        any = false;
        break;
      default:
        field += c;
        any = true;
    }
  }
  if (quoted) throw DataError("unterminated quoted field at end of input");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::vector<std::string>> read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in);
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::optional<std::uint32_t> RecordTable::find(const std::string& id) const {
  auto it = positions.find(id);
  if (it == positions.end()) return std::nullopt;
  return it->second;
}

RecordTable make_table(std::vector<std::string> ids, std::vector<std::string> texts) {
  if (ids.size() != texts.size()) throw DataError("ids and texts differ in length");
  RecordTable t;
  t.ids = std::move(ids);
  t.texts = std::move(texts);
  for (std::uint32_t i = 0; i < t.ids.size(); ++i) {
    if (!t.positions.emplace(t.ids[i], i).second) {
      throw DataError("duplicate record id '" + t.ids[i] + "'");
    }
  }
  return t;
}

RecordTable ingest_csv(const std::string& path, const std::string& id_column,
                       const std::vector<std::string>& text_columns) {
  auto rows = read_csv_file(path);
  if (rows.empty()) throw DataError("'" + path + "' has no header row");
  const auto& header = rows.front();
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw DataError("'" + path + "' has no column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t id_col = column(id_column);
  std::vector<std::size_t> text_cols;
  if (text_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c != id_col) text_cols.push_back(c);
    }
  } else {
    for (const auto& name : text_columns) text_cols.push_back(column(name));
  }

  std::vector<std::string> ids;
  std::vector<std::string> texts;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto cell = [&](std::size_t c) -> std::string_view {
      return c < row.size() ? std::string_view(row[c]) : std::string_view();
    };
    ids.emplace_back(cell(id_col));
    std::string text;
    for (std::size_t i = 0; i < text_cols.size(); ++i) {
      if (i > 0) text += ' ';
      text += cell(text_cols[i]);
    }
    texts.push_back(std::move(text));
  }
  return make_table(std::move(ids), std::move(texts));
}

std::vector<IdPair> read_id_pairs(const std::string& path) {
  auto rows = read_csv_file(path);
  if (rows.empty()) throw DataError("'" + path + "' has no header row");
  if (rows.front().size() < 2) throw DataError("'" + path + "' needs two id columns");
  const bool scored = rows.front().size() >= 3 && rows.front()[2] == "score";
  std::vector<IdPair> out;
  out.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() < 2) {
      throw DataError("'" + path + "' line " + std::to_string(r + 1) + " has fewer than two fields");
    }
    IdPair p{row[0], row[1], 0.0};
    if (scored && row.size() >= 3) {
      try {
        p.score = std::stod(row[2]);
      } catch (const std::exception&) {
        throw DataError("'" + path + "' line " + std::to_string(r + 1) + " has a bad score");
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<KnownMatch> resolve_matches(const std::vector<IdPair>& pairs,
                                        const RecordTable& left,
                                        const RecordTable& right,
                                        std::size_t* unknown) {
  std::vector<KnownMatch> out;
  std::size_t missing = 0;
  for (const auto& p : pairs) {
    auto l = left.find(p.left);
    auto r = right.find(p.right);
    if (!l || !r) {
      if (!unknown) {
        throw DataError("match (" + p.left + ", " + p.right + ") references unknown id '" +
                        (!l ? p.left : p.right) + "'");
      }
      ++missing;
      continue;
    }
    out.push_back({*l, *r});
  }
  if (unknown) *unknown = missing;
  return out;
}

std::string format_score(double score) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", score);
  return buf;
}

void write_pairs(const PairSet& pairs, const RecordTable& left,
                 const RecordTable& right, const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out << "left_id,right_id,score\n";
    for (const auto& p : pairs) {
      if (p.query >= left.size() || p.target >= right.size()) {
        out.close();
        fs::remove(tmp);
        throw DataError("pair refers to a record outside the tables");
      }
      out << csv_escape(left.ids[p.query]) << ',' << csv_escape(right.ids[p.target]) << ','
          << format_score(p.score) << '\n';
    }
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw DataError("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw DataError("cannot move pairs into '" + path + "': " + ec.message());
  }
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  if (has_gold) out << "recall: " << format_score(recall) << '\n';
  out << "pairs: " << pairs << '\n' << "k_tilde: " << format_score(k_tilde) << '\n';
  if (has_gold) {
    out << "gold_matches: " << matches << '\n'
        << "found_matches: " << found << '\n'
        << "excluded_gold: " << excluded_gold << '\n';
  }
  if (seconds >= 0.0) out << "runtime_seconds: " << format_score(seconds) << '\n';
  if (peak_rss_kb >= 0) out << "peak_rss_kb_approx: " << peak_rss_kb << '\n';
  if (!metadata.empty()) out << "metadata: " << metadata << '\n';
  return out.str();
}

EvalReport evaluate_pairs(const std::vector<IdPair>& pairs,
                          const std::vector<IdPair>& gold,
                          const RecordTable& left, const RecordTable& right,
                          bool dedup) {
  EvalReport report;
  report.has_gold = true;
  auto key = [&](std::uint32_t l, std::uint32_t r) {
    if (dedup && l > r) std::swap(l, r);
    return (static_cast<std::uint64_t>(l) << 32) | r;
  };
  std::set<std::uint64_t> found;
  std::set<std::uint64_t> returned;
  for (const auto& p : pairs) {
    auto l = left.find(p.left);
    auto r = right.find(p.right);
    if (!l || !r) {
      throw DataError("pair (" + p.left + ", " + p.right + ") references an unknown id");
    }
    returned.insert(key(*l, *r));
  }
  report.pairs = returned.size();

  std::set<std::uint64_t> matches;
  for (const auto& g : gold) {
    auto l = left.find(g.left);
    auto r = right.find(g.right);
    if (!l || !r) {
      ++report.excluded_gold;
      continue;
    }
    matches.insert(key(*l, *r));
  }
  report.matches = matches.size();
  for (std::uint64_t m : matches) {
    if (returned.count(m)) found.insert(m);
  }
  report.found = found.size();
  report.recall = report.matches ? static_cast<double>(report.found) / report.matches : 0.0;
  const std::size_t min_side = dedup ? left.size() : std::min(left.size(), right.size());
  report.k_tilde = min_side ? static_cast<double>(report.pairs) / min_side : 0.0;
  return report;
}

long peak_rss_kb() {
  struct rusage usage {};
  if (getrusage(RUSAGE_SELF, &usage) != 0) return -1;
  return usage.ru_maxrss;
}

}  // namespace shallowblock
