#include <algorithm>
#include <boost/regex.hpp>
#include <chrono>
#include <unordered_map>

#include "mbda/faac.hpp"

namespace mbda {

std::int64_t FeatureVector::count(std::string_view column) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == column) return counts[i];
  throw DataError("no column " + std::string(column));
}

FeatureMatrix::FeatureMatrix(std::vector<std::string> columns) : columns_(std::move(columns)) {}

std::ptrdiff_t FeatureMatrix::column_index(std::string_view name) const {
  auto it = std::find(columns_.begin(), columns_.end(), name);
  return it == columns_.end() ? -1 : it - columns_.begin();
}

std::ptrdiff_t FeatureMatrix::row_index(std::string_view label) const {
  auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
  return (it == labels_.end() || *it != label) ? -1 : it - labels_.begin();
}

void FeatureMatrix::append_row(std::string label, std::span<const std::int64_t> counts) {
  if (counts.size() != cols())
    throw DataError("row " + label + " has " + std::to_string(counts.size()) + " values, expected " +
                    std::to_string(cols()));
  if (!labels_.empty() && !(labels_.back() < label))
    throw DataError("row labels must be strictly increasing at " + label);
  labels_.push_back(std::move(label));
  values_.insert(values_.end(), counts.begin(), counts.end());
}

FeatureMatrix FeatureMatrix::without_rows(const std::set<std::string>& labels) const {
  FeatureMatrix out(columns_);
  for (std::size_t r = 0; r < rows(); ++r)
    if (!labels.count(labels_[r])) out.append_row(labels_[r], row(r));
  return out;
}

FeatureMatrix FeatureMatrix::with_rows_replaced(const FeatureMatrix& replacement) const {
  if (replacement.columns() != columns_) throw DataError("replacement rows have different columns");
  FeatureMatrix out = *this;
  for (std::size_t r = 0; r < replacement.rows(); ++r) {
    auto idx = row_index(replacement.labels()[r]);
    if (idx < 0) throw DataError("replacement row " + replacement.labels()[r] + " not in matrix");
    auto src = replacement.row(r);
    std::copy(src.begin(), src.end(), out.values_.begin() + idx * static_cast<std::ptrdiff_t>(cols()));
  }
  return out;
}

struct Matcher::Impl {
  struct Variable {
    boost::regex pattern;
    std::unordered_map<std::string, std::vector<std::size_t>> literal;
    std::vector<std::pair<boost::regex, std::size_t>> regex;
    std::vector<std::size_t> defaults;
  };

  ParserConfig config;
  std::vector<Variable> variables;
  std::size_t entry_col = 0;
  std::size_t triplet_col = 0;

  // Calls hit(feature_index) for every feature the occurrence resolves to.
  template <typename Fn>
  void resolve(const Variable& var, const std::string& value, Fn&& hit) const {
    bool any = false;
    if (auto it = var.literal.find(value); it != var.literal.end()) {
      for (auto f : it->second) hit(f);
      any = true;
    }
    for (const auto& [re, f] : var.regex) {
      if (boost::regex_match(value, re)) {
        hit(f);
        any = true;
      }
    }
    if (!any)
      for (auto f : var.defaults) hit(f);
  }

  template <typename Fn>
  void for_each_capture(std::string_view entry, const Variable& var, Fn&& fn) const {
    using It = std::string_view::const_iterator;
    boost::regex_iterator<It> it(entry.begin(), entry.end(), var.pattern), end;
    std::string value;
    for (; it != end; ++it) {
      const auto& m = (*it)[1];
      value.assign(m.first, m.second);
      fn(value);
    }
  }
};

Matcher::Matcher(const ParserConfig& config) : impl_(std::make_unique<Impl>()) {
  config.validate();
  impl_->config = config;
  std::unordered_map<std::string, std::size_t> var_index;
  for (const auto& v : config.variables) {
    var_index[v.name] = impl_->variables.size();
    impl_->variables.push_back({boost::regex(v.pattern, boost::regex::optimize), {}, {}, {}});
  }
  for (std::size_t f = 0; f < config.features.size(); ++f) {
    const auto& def = config.features[f];
    auto& var = impl_->variables[var_index.at(def.variable)];
    switch (def.kind) {
      case MatchKind::kLiteral:
        var.literal[def.value].push_back(f);
        break;
      case MatchKind::kRegex:
        var.regex.emplace_back(boost::regex(def.value), f);
        break;
      case MatchKind::kDefault:
        var.defaults.push_back(f);
        break;
    }
  }
  impl_->entry_col = config.features.size();
  impl_->triplet_col = config.features.size() + 1;
}

Matcher::~Matcher() = default;
Matcher::Matcher(Matcher&&) noexcept = default;
Matcher& Matcher::operator=(Matcher&&) noexcept = default;

const ParserConfig& Matcher::config() const { return impl_->config; }
std::size_t Matcher::column_count() const { return impl_->config.features.size() + 2; }

void Matcher::count_entry(std::string_view entry, std::span<std::int64_t> counts) const {
  for (const auto& var : impl_->variables)
    impl_->for_each_capture(entry, var, [&](const std::string& value) {
      impl_->resolve(var, value, [&](std::size_t f) { ++counts[f]; });
    });
  counts[impl_->entry_col] += 1;
  const auto& sep = impl_->config.triplet_separator;
  std::int64_t triplets = 0;
  for (std::size_t pos = entry.find(sep); pos != std::string_view::npos;
       pos = entry.find(sep, pos + sep.size()))
    ++triplets;
  counts[impl_->triplet_col] += triplets;
}

void Matcher::mark_features(std::string_view entry, std::vector<char>& hits) const {
  hits.assign(impl_->config.features.size(), 0);
  for (const auto& var : impl_->variables)
    impl_->for_each_capture(entry, var, [&](const std::string& value) {
      impl_->resolve(var, value, [&](std::size_t f) { hits[f] = 1; });
    });
}

void Matcher::capture_values(std::string_view entry, std::size_t variable,
                             std::vector<std::string>& out, bool distinct) const {
  out.clear();
  impl_->for_each_capture(entry, impl_->variables.at(variable), [&](const std::string& value) {
    if (!distinct || std::find(out.begin(), out.end(), value) == out.end()) out.push_back(value);
  });
}

std::ptrdiff_t Matcher::variable_index(std::string_view name) const {
  const auto& vars = impl_->config.variables;
  for (std::size_t i = 0; i < vars.size(); ++i)
    if (vars[i].name == name) return static_cast<std::ptrdiff_t>(i);
  return -1;
}

FeatureVector parse_chunk(const std::vector<LogEntry>& entries, const ParserConfig& config,
                          std::string label) {
  Matcher matcher(config);
  FeatureVector fv{std::move(label), config.column_names(),
                   std::vector<std::int64_t>(matcher.column_count(), 0)};
  for (const auto& e : entries) matcher.count_entry(e.raw_text, fv.counts);
  return fv;
}

nlohmann::json to_json(const RunReport& report) {
  nlohmann::json chunks = nlohmann::json::array();
  for (const auto& c : report.chunks)
    chunks.push_back({{"chunk", c.chunk_id}, {"label", c.label}, {"path", c.path},
                      {"status", c.ok ? "ok" : "failed"}, {"message", c.message},
                      {"entries", c.entries}, {"wall_ms", c.wall_ms}});
  return {{"chunks", chunks}, {"missing_bins", report.missing_bins}, {"wall_ms", report.wall_ms}};
}

ParseResult parse_corpus(const CorpusManifest& manifest, const ParserConfig& config,
                         const ParseOptions& options) {
  auto t0 = std::chrono::steady_clock::now();
  Matcher matcher(config);
  const std::size_t width = matcher.column_count();

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < manifest.chunks.size(); ++i) {
    const auto& c = manifest.chunks[i];
    if (c.unbinned()) continue;
    if (!options.only_bins.empty() && !options.only_bins.count(c.label)) continue;
    todo.push_back(i);
  }
  if (options.progress) {
    options.progress->total = todo.size();
    options.progress->done = 0;
  }

  std::vector<std::vector<std::int64_t>> partial(todo.size());
  std::vector<ChunkStatus> status(todo.size());
  parallel_for(todo.size(), options.workers, [&](std::size_t k) {
    auto start = std::chrono::steady_clock::now();
    const std::size_t id = todo[k];
    const auto& chunk = manifest.chunks[id];
    ChunkStatus& st = status[k];
    st.chunk_id = id;
    st.label = chunk.label;
    st.path = chunk.path;
    std::vector<std::int64_t> counts(width, 0);
    const std::set<std::uint64_t>* skip = nullptr;
    if (options.exclusions)
      if (auto it = options.exclusions->find(chunk.path); it != options.exclusions->end())
        skip = &it->second;
    try {
      visit_entries(manifest, id, [&](const LogEntryView& e) {
        if (skip && skip->count(e.offset)) return;
        matcher.count_entry(e.raw_text, counts);
        ++st.entries;
      });
      partial[k] = std::move(counts);
    } catch (const std::exception& e) {
      st.ok = false;
      st.message = e.what();
    }
    st.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (options.progress) ++options.progress->done;
  });

  // Deterministic merge: bins in label order, chunks within a bin in
  // manifest order.
  std::map<std::string, std::vector<std::size_t>> by_bin;
  for (std::size_t k = 0; k < todo.size(); ++k) by_bin[status[k].label].push_back(k);

  ParseResult result{FeatureMatrix(config.column_names()), {}};
  for (const auto& [label, ks] : by_bin) {
    std::vector<std::int64_t> row(width, 0);
    bool ok = true;
    for (auto k : ks) {
      if (!status[k].ok) {
        ok = false;
        continue;
      }
      for (std::size_t c = 0; c < width; ++c) row[c] += partial[k][c];
    }
    if (ok)
      result.matrix.append_row(label, row);
    else
      result.report.missing_bins.push_back(label);
  }
  result.report.chunks = std::move(status);
  result.report.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

FeatureMatrix fuse(const std::vector<std::pair<std::string, FeatureMatrix>>& sources) {
  if (sources.empty()) throw DataError("fuse needs at least one matrix");
  if (sources.size() == 1) return sources.front().second;
  const auto& labels = sources.front().second.labels();
  std::vector<std::string> columns;
  for (const auto& [name, m] : sources) {
    const auto& other = m.labels();
    for (std::size_t r = 0; r < std::max(labels.size(), other.size()); ++r) {
      if (r >= labels.size() || r >= other.size() || labels[r] != other[r]) {
        const std::string want = r < labels.size() ? labels[r] : "(none)";
        const std::string got = r < other.size() ? other[r] : "(none)";
        throw DataError("source " + name + " disagrees on bin labels at row " + std::to_string(r) + ": expected " +
                        want + ", got " + got);
      }
    }
    for (const auto& c : m.columns()) columns.push_back(name + "/" + c);
  }
  FeatureMatrix out(std::move(columns));
  std::vector<std::int64_t> row;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    row.clear();
    for (const auto& [name, m] : sources) {
      auto span = m.row(r);
      row.insert(row.end(), span.begin(), span.end());
    }
    out.append_row(labels[r], row);
  }
  return out;
}

}  // namespace mbda
