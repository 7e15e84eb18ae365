#pragma once

// Dataset ingestion and splitting: dense categorical CSV, ratings logs
// (userId,movieId,rating[,timestamp]), train/validation/test splits and the
// hide-one evaluation protocol.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pmfvb/error.hpp"
#include "pmfvb/model.hpp"
#include "pmfvb/random.hpp"

namespace pmfvb {

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

/// Splits on commas without copying. Fields keep surrounding blanks.
inline void split_fields(std::string_view line, std::vector<std::string_view>& out) {
    out.clear();
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

inline long long parse_int(std::string_view field, std::size_t line, std::size_t column) {
    const auto s = trim(field);
    long long v = 0;
    const char* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc() || ptr != end) {
        throw ParseError("expected an integer, got '" + std::string(s) + "'", line, column);
    }
    return v;
}

inline double parse_real(std::string_view field, std::size_t line, std::size_t column) {
    const auto s = std::string(trim(field));
    if (s.empty()) throw ParseError("expected a number, got an empty field", line, column);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ParseError("expected a number, got '" + s + "'", line, column);
    }
    if (used != s.size()) throw ParseError("expected a number, got '" + s + "'", line, column);
    return v;
}

inline std::vector<int> parse_cardinality_header(std::string_view rest, std::size_t line) {
    std::vector<std::string_view> fields;
    split_fields(rest, fields);
    std::vector<int> cards;
    for (std::size_t k = 0; k < fields.size(); ++k) {
        const long long c = parse_int(fields[k], line, k + 1);
        if (c < 1 || c > std::numeric_limits<Category>::max()) {
            throw ParseError("declared cardinality out of range", line, k + 1);
        }
        cards.push_back(static_cast<int>(c));
    }
    return cards;
}

}  // namespace detail

/// Dense CSV: one sample per line, one column per variable, 0 = missing. An
/// optional first line "#I=c1,c2,..." declares the cardinalities; otherwise
/// each is the largest category seen in its column (1 for a column with no
/// observations). Other lines starting with '#' and blank lines are skipped.
inline Dataset read_dense_csv(std::istream& in) {
    std::vector<int> declared;
    std::vector<Category> obs;
    std::vector<int> seen_max;
    std::size_t num_vars = 0;
    std::size_t samples = 0;
    std::size_t line_no = 0;
    std::string line;
    std::vector<std::string_view> fields;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = detail::trim(line);
        if (text.empty()) continue;
        if (text.front() == '#') {
            if (text.starts_with("#I=")) {
                if (samples > 0 || !declared.empty()) {
                    throw ParseError("cardinality header must precede the data", line_no, 1);
                }
                declared = detail::parse_cardinality_header(text.substr(3), line_no);
                num_vars = declared.size();
            }
            continue;
        }
        detail::split_fields(text, fields);
        if (num_vars == 0) num_vars = fields.size();
        if (fields.size() != num_vars) {
            throw ParseError("expected " + std::to_string(num_vars) + " fields, found " +
                                 std::to_string(fields.size()),
                             line_no, std::min(fields.size(), num_vars) + 1);
        }
        if (seen_max.empty()) seen_max.assign(num_vars, 0);
        for (std::size_t n = 0; n < num_vars; ++n) {
            const long long v = detail::parse_int(fields[n], line_no, n + 1);
            if (v < 0) throw ParseError("negative category", line_no, n + 1);
            const long long cap = declared.empty() ? std::numeric_limits<Category>::max() : declared[n];
            if (v > cap) {
                throw ParseError("category " + std::to_string(v) + " exceeds cardinality " + std::to_string(cap),
                                 line_no, n + 1);
            }
            obs.push_back(static_cast<Category>(v));
            seen_max[n] = std::max(seen_max[n], static_cast<int>(v));
        }
        ++samples;
    }
    if (num_vars == 0) throw ParseError("no data and no cardinality header");
    std::vector<int> cards = declared;
    if (cards.empty()) {
        cards.resize(num_vars);
        for (std::size_t n = 0; n < num_vars; ++n) cards[n] = std::max(1, seen_max[n]);
    }
    return Dataset(std::move(cards), samples, std::move(obs));
}

inline Dataset load_dense_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    try {
        return read_dense_csv(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

/// Writes the "#I=" header followed by one line per sample.
inline void write_dense_csv(std::ostream& out, const Dataset& data) {
    out << "#I=";
    for (std::size_t n = 0; n < data.num_vars(); ++n) out << (n ? "," : "") << data.cardinality(n);
    out << '\n';
    std::string line;
    for (std::size_t t = 0; t < data.num_samples(); ++t) {
        line.clear();
        const auto y = data.sample(t);
        for (std::size_t n = 0; n < y.size(); ++n) {
            if (n) line += ',';
            line += std::to_string(y[n]);
        }
        line += '\n';
        out << line;
    }
}

inline void save_dense_csv(const std::string& path, const Dataset& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write '" + path + "'");
    write_dense_csv(out, data);
}

// ---------------------------------------------------------------------------
// Ratings logs

struct RatingTriple {
    std::int64_t user = 0;
    std::int64_t item = 0;
    double rating = 0.0;
};

/// Half-star scale 0.5, 1.0, ..., 5.0.
inline std::vector<double> half_star_map() {
    std::vector<double> m(10);
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = 0.5 * static_cast<double>(k + 1);
    return m;
}

struct RatingsIngestSpec {
    std::size_t top_n_items = 50;
    std::size_t min_rated_items = 2;
    /// rating_map[k] is the raw value mapped to category k + 1.
    std::vector<double> rating_map = half_star_map();

    void validate() const {
        if (top_n_items < 1) throw DomainError("RatingsIngestSpec: top_n_items must be positive");
        if (min_rated_items < 1) throw DomainError("RatingsIngestSpec: min_rated_items must be at least 1");
        if (rating_map.empty()) throw DomainError("RatingsIngestSpec: rating_map is empty");
        for (std::size_t k = 1; k < rating_map.size(); ++k) {
            if (!(rating_map[k] > rating_map[k - 1])) {
                throw DomainError("RatingsIngestSpec: rating_map must be strictly increasing");
            }
        }
    }

    /// Category for a raw value, or 0 if it is not in the map.
    Category category_of(double raw) const {
        const auto it = std::lower_bound(rating_map.begin(), rating_map.end(), raw - 1e-9);
        if (it == rating_map.end() || std::abs(*it - raw) > 1e-9) return kMissing;
        return static_cast<Category>(it - rating_map.begin() + 1);
    }
};

/// Item x user matrix built from a ratings log. Variable n is item_ids[n],
/// sample t is user_ids[t].
struct RatingsMatrix {
    Dataset data;
    std::vector<std::int64_t> item_ids;
    std::vector<std::int64_t> user_ids;
    /// Users in the log with fewer than min_rated_items ratings of the kept items.
    std::size_t dropped_users = 0;
};

namespace detail {

/// Calls fn(triple, line) for every record of a ratings CSV.
template <class Fn>
void for_each_rating(std::istream& in, Fn&& fn) {
    std::string line;
    std::vector<std::string_view> fields;
    std::size_t line_no = 0;
    bool header_checked = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty()) continue;
        split_fields(text, fields);
        if (!header_checked) {
            header_checked = true;
            if (!fields.empty() && trim(fields[0]) == "userId") {
                if (fields.size() < 3 || trim(fields[1]) != "movieId" || trim(fields[2]) != "rating") {
                    throw ParseError("expected header userId,movieId,rating[,timestamp]", line_no, 1);
                }
                continue;
            }
        }
        if (fields.size() < 3 || fields.size() > 4) {
            throw ParseError("expected 3 or 4 fields, found " + std::to_string(fields.size()), line_no, 1);
        }
        RatingTriple r;
        r.user = parse_int(fields[0], line_no, 1);
        r.item = parse_int(fields[1], line_no, 2);
        r.rating = parse_real(fields[2], line_no, 3);
        fn(r, line_no);
    }
}

template <class Source>
RatingsMatrix ingest_two_pass(Source&& pass, const RatingsIngestSpec& spec) {
    spec.validate();
    // Pass 1: counts per item; also rejects unmapped values early.
    std::unordered_map<std::int64_t, std::size_t> counts;
    std::unordered_set<std::int64_t> users;
    std::vector<double> unmapped;
    pass([&](const RatingTriple& r) {
        users.insert(r.user);
        if (spec.category_of(r.rating) == kMissing) {
            if (std::find(unmapped.begin(), unmapped.end(), r.rating) == unmapped.end()) unmapped.push_back(r.rating);
            return;
        }
        ++counts[r.item];
    });
    if (!unmapped.empty()) {
        std::sort(unmapped.begin(), unmapped.end());
        std::ostringstream msg;
        msg.precision(17);
        msg << "rating values not in the rating map:";
        for (double v : unmapped) msg << ' ' << v;
        throw IngestError(msg.str());
    }
    std::vector<std::pair<std::int64_t, std::size_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (ranked.size() > spec.top_n_items) ranked.resize(spec.top_n_items);
    if (ranked.empty()) throw IngestError("ratings log has no records");

    RatingsMatrix out;
    std::unordered_map<std::int64_t, std::size_t> item_index;
    for (const auto& [item, c] : ranked) {
        item_index.emplace(item, out.item_ids.size());
        out.item_ids.push_back(item);
    }
    const std::size_t N = out.item_ids.size();

    // Pass 2: ratings of the selected items, grouped by user (later records
    // for the same user and item overwrite earlier ones).
    std::map<std::int64_t, std::vector<Category>> rows;
    pass([&](const RatingTriple& r) {
        const auto it = item_index.find(r.item);
        if (it == item_index.end()) return;
        auto& row = rows[r.user];
        if (row.empty()) row.assign(N, kMissing);
        row[it->second] = spec.category_of(r.rating);
    });

    std::vector<Category> obs;
    for (const auto& [user, row] : rows) {
        const auto rated = static_cast<std::size_t>(std::count_if(row.begin(), row.end(), [](Category c) {
            return c != kMissing;
        }));
        if (rated < spec.min_rated_items) continue;
        out.user_ids.push_back(user);
        obs.insert(obs.end(), row.begin(), row.end());
    }
    out.dropped_users = users.size() - out.user_ids.size();
    std::vector<int> cards(N, static_cast<int>(spec.rating_map.size()));
    out.data = Dataset(std::move(cards), out.user_ids.size(), std::move(obs));
    return out;
}

}  // namespace detail

/// Selects the top_n_items most-rated items (ties by ascending id), keeps
/// users with at least min_rated_items ratings among them, and maps ratings
/// through rating_map. Users are ordered by ascending id.
inline RatingsMatrix ingest_ratings(std::span<const RatingTriple> triples, const RatingsIngestSpec& spec) {
    return detail::ingest_two_pass(
        [&](auto&& fn) {
            for (const auto& r : triples) fn(r);
        },
        spec);
}

/// Streams a ratings CSV twice; only the selected items' ratings are held in memory.
inline RatingsMatrix ingest_ratings_csv(const std::string& path, const RatingsIngestSpec& spec) {
    return detail::ingest_two_pass(
        [&](auto&& fn) {
            std::ifstream in(path);
            if (!in) throw ParseError("cannot open '" + path + "'");
            detail::for_each_rating(in, [&](const RatingTriple& r, std::size_t) { fn(r); });
        },
        spec);
}

inline std::vector<RatingTriple> read_ratings_csv(std::istream& in) {
    std::vector<RatingTriple> out;
    detail::for_each_rating(in, [&](const RatingTriple& r, std::size_t) { out.push_back(r); });
    return out;
}

// ---------------------------------------------------------------------------
// Splits

enum class SplitUnit { per_rating, per_column };

struct SplitSpec {
    double train_fraction = 0.7;
    double validation_fraction = 0.1;
    double test_fraction = 0.2;
    SplitUnit unit = SplitUnit::per_rating;
    std::uint64_t seed = 0;

    void validate() const {
        for (double f : {train_fraction, validation_fraction, test_fraction}) {
            if (!(f >= 0.0 && f <= 1.0)) throw DomainError("SplitSpec: fractions must lie in [0, 1]");
        }
        if (std::abs(train_fraction + validation_fraction + test_fraction - 1.0) > 1e-12) {
            throw DomainError("SplitSpec: fractions must sum to 1");
        }
    }
};

struct SplitResult {
    Dataset train;
    Dataset validation;
    Dataset test;
    /// Observed cells (per_rating) or columns (per_column) in each part.
    std::array<std::size_t, 3> counts{};
    std::vector<std::string> warnings;
};

namespace detail {

/// Largest-remainder apportionment of `total` units; each part is within one
/// unit of fraction * total.
inline std::array<std::size_t, 3> apportion(std::size_t total, const std::array<double, 3>& fractions) {
    std::array<std::size_t, 3> out{};
    std::array<double, 3> rem{};
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        const double exact = fractions[k] * static_cast<double>(total);
        out[k] = static_cast<std::size_t>(std::floor(exact));
        rem[k] = exact - static_cast<double>(out[k]);
        assigned += out[k];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++out[order[k % 3]];
    return out;
}

}  // namespace detail

/// Seeded partition of the observed cells (per_rating) or of whole samples
/// (per_column). A random permutation is cut at apportioned counts, so the
/// parts are disjoint, cover every observed cell and match the fractions to
/// within one unit.
inline SplitResult split(const Dataset& data, const SplitSpec& spec) {
    spec.validate();
    const std::array<double, 3> fractions{spec.train_fraction, spec.validation_fraction, spec.test_fraction};
    static constexpr const char* names[3] = {"train", "validation", "test"};
    Rng rng(spec.seed, Stream::split);
    SplitResult out;
    const std::vector<int> cards(data.cardinalities().begin(), data.cardinalities().end());

    if (spec.unit == SplitUnit::per_column) {
        const std::size_t T = data.num_samples();
        std::vector<std::size_t> perm(T);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = T; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
        out.counts = detail::apportion(T, fractions);
        std::array<std::vector<std::size_t>, 3> cols;
        std::size_t pos = 0;
        for (std::size_t k = 0; k < 3; ++k) {
            cols[k].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                           perm.begin() + static_cast<std::ptrdiff_t>(pos + out.counts[k]));
            std::sort(cols[k].begin(), cols[k].end());
            pos += out.counts[k];
        }
        out.train = data.select(cols[0]);
        out.validation = data.select(cols[1]);
        out.test = data.select(cols[2]);
    } else {
        std::vector<std::size_t> cells;
        const auto raw = data.raw();
        for (std::size_t k = 0; k < raw.size(); ++k) {
            if (raw[k] != kMissing) cells.push_back(k);
        }
        for (std::size_t i = cells.size(); i > 1; --i) std::swap(cells[i - 1], cells[rng.below(i)]);
        out.counts = detail::apportion(cells.size(), fractions);
        std::array<std::vector<Category>, 3> parts;
        for (auto& p : parts) p.assign(raw.size(), kMissing);
        std::size_t pos = 0;
        for (std::size_t k = 0; k < 3; ++k) {
            for (std::size_t j = 0; j < out.counts[k]; ++j, ++pos) parts[k][cells[pos]] = raw[cells[pos]];
        }
        out.train = Dataset(cards, data.num_samples(), std::move(parts[0]));
        out.validation = Dataset(cards, data.num_samples(), std::move(parts[1]));
        out.test = Dataset(cards, data.num_samples(), std::move(parts[2]));
    }
    for (std::size_t k = 0; k < 3; ++k) {
        if (fractions[k] > 0.0 && out.counts[k] == 0) {
            out.warnings.push_back(std::string(names[k]) + " split is empty although its fraction is " +
                                   std::to_string(fractions[k]));
        }
    }
    return out;
}

struct HiddenEntry {
    std::size_t column = 0;
    std::size_t variable = 0;
    Category truth = kMissing;
};

struct HideOneResult {
    std::vector<HiddenEntry> entries;
    /// The test data with every hidden entry set to missing.
    Dataset context;
    /// Columns with fewer than two observed entries.
    std::size_t skipped = 0;
};

/// For every column with at least two observed entries, hides one of them
/// chosen uniformly at random.
inline HideOneResult hide_one(const Dataset& test, std::uint64_t seed) {
    Rng rng(seed, Stream::hide);
    HideOneResult out;
    out.context = test;
    std::vector<std::size_t> observed;
    for (std::size_t t = 0; t < test.num_samples(); ++t) {
        observed.clear();
        const auto y = test.sample(t);
        for (std::size_t n = 0; n < y.size(); ++n) {
            if (y[n] != kMissing) observed.push_back(n);
        }
        if (observed.size() < 2) {
            ++out.skipped;
            continue;
        }
        const std::size_t n = observed[rng.below(observed.size())];
        out.entries.push_back({t, n, y[n]});
        out.context.set(n, t, kMissing);
    }
    return out;
}

}  // namespace pmfvb
