#include "tspo/datapipe.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tspo/errors.hpp"

namespace tspo::data {

std::vector<std::size_t> uniform_indices(std::size_t total, std::size_t count) {
    if (total == 0 || count == 0) throw InvalidArgumentError("uniform_indices: zero size");
    std::vector<std::size_t> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        out.push_back((2 * i + 1) * total / (2 * count));
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

SpliceSample build_needle_sample(const world::SyntheticVideo& target,
                                 const std::vector<world::SyntheticVideo>& distractors,
                                 const world::QueryItem& query, Rng& rng) {
    std::size_t d = target.frames.cols;
    for (const auto& v : distractors)
        if (v.frames.cols != d)
            throw InvalidArgumentError("build_needle_sample: feature dim mismatch across videos");

    // One entry per event segment: (video index, frame range). Video 0 is the target.
    struct Segment {
        std::size_t video;
        std::size_t lo, hi;
    };
    std::vector<Segment> segments;
    for (auto [lo, hi] : target.event_boundaries) segments.push_back({0, lo, hi});
    for (std::size_t vi = 0; vi < distractors.size(); ++vi)
        for (auto [lo, hi] : distractors[vi].event_boundaries) segments.push_back({vi + 1, lo, hi});

    // Fisher-Yates; within-segment frame order is preserved.
    for (std::size_t i = segments.size(); i > 1; --i)
        std::swap(segments[i - 1], segments[rng.uniform_index(i)]);

    std::size_t total = 0;
    for (const Segment& s : segments) total += s.hi - s.lo;

    SpliceSample sample;
    sample.frames = Matrix(total, d);
    sample.target_mask.assign(total, false);
    sample.style = world::Style::needle;

    std::vector<std::size_t> target_position(target.frames.rows);  // original -> spliced index
    std::size_t pos = 0;
    for (const Segment& s : segments) {
        const Matrix& src = s.video == 0 ? target.frames : distractors[s.video - 1].frames;
        for (std::size_t t = s.lo; t < s.hi; ++t, ++pos) {
            std::copy(src.row(t), src.row(t) + d, sample.frames.row(pos));
            if (s.video == 0) {
                sample.target_mask[pos] = true;
                target_position[t] = pos;
            }
        }
    }

    sample.query = query;
    for (world::RequiredGroup& g : sample.query.required_groups) {
        for (std::size_t& f : g.frames) {
            if (f >= target.frames.rows)
                throw InvalidArgumentError("build_needle_sample: query group frame out of range");
            f = target_position[f];
        }
        std::sort(g.frames.begin(), g.frames.end());
    }
    sample.answer_key = sample.query.correct_option;
    return sample;
}

FilterVerdict difficulty_filter(const SpliceSample& sample, const world::OracleConfig&) {
    std::size_t t_len = sample.frames.rows;
    if (world::groups_satisfied(sample.query, uniform_indices(t_len, 4)))
        return FilterVerdict::drop_too_easy;

    // Optimistic 64-frame probe: greedily pick frames covering the most
    // still-unsatisfied groups. If even that fails, the sample is unsolvable.
    const auto& groups = sample.query.required_groups;
    std::vector<std::size_t> need(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].frames.size() < groups[g].threshold) return FilterVerdict::drop_too_hard;
        need[g] = groups[g].threshold;
    }
    std::vector<std::vector<std::size_t>> frame_groups(t_len);
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (std::size_t f : groups[g].frames) frame_groups[f].push_back(g);

    std::vector<bool> picked(t_len, false);
    std::size_t budget = 64;
    while (budget > 0) {
        bool any_need = false;
        for (std::size_t n : need) any_need |= n > 0;
        if (!any_need) break;
        std::size_t best = t_len, best_gain = 0;
        for (std::size_t f = 0; f < t_len; ++f) {
            if (picked[f]) continue;
            std::size_t gain = 0;
            for (std::size_t g : frame_groups[f])
                if (need[g] > 0) ++gain;
            if (gain > best_gain) {
                best_gain = gain;
                best = f;
            }
        }
        if (best == t_len) return FilterVerdict::drop_too_hard;  // no frame helps
        picked[best] = true;
        --budget;
        for (std::size_t g : frame_groups[best])
            if (need[g] > 0) --need[g];
    }
    for (std::size_t n : need)
        if (n > 0) return FilterVerdict::drop_too_hard;
    return FilterVerdict::keep;
}

namespace {

constexpr char kMagic[4] = {'T', 'S', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    explicit Writer(std::ostream& os) : os_(os) {}
    template <typename T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        char buf[sizeof(T)];
        std::memcpy(buf, &v, sizeof(T));  // host is little-endian
        os_.write(buf, sizeof(T));
    }
    void raw(const char* p, std::size_t n) { os_.write(p, n); }

private:
    std::ostream& os_;
};

class Reader {
public:
    Reader(std::istream& is, std::uint64_t size) : is_(is), size_(size) {}
    template <typename T>
    T get(const char* what) {
        char buf[sizeof(T)];
        if (offset_ + sizeof(T) > size_ || !is_.read(buf, sizeof(T)))
            throw FormatError(std::string("truncated reading ") + what, offset_);
        offset_ += sizeof(T);
        T v;
        std::memcpy(&v, buf, sizeof(T));
        return v;
    }
    void raw(char* p, std::size_t n, const char* what) {
        if (offset_ + n > size_ || !is_.read(p, n))
            throw FormatError(std::string("truncated reading ") + what, offset_);
        offset_ += n;
    }
    std::uint64_t offset() const { return offset_; }
    std::uint64_t size() const { return size_; }

private:
    std::istream& is_;
    std::uint64_t size_;
    std::uint64_t offset_ = 0;
};

}  // namespace

std::uint64_t write_dataset(const std::string& path, const std::vector<SpliceSample>& samples) {
    std::uint32_t dim = samples.empty() ? 0 : static_cast<std::uint32_t>(samples[0].frames.cols);
    for (const auto& s : samples)
        if (s.frames.cols != dim)
            throw InvalidArgumentError("write_dataset: feature dim differs across samples");

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("write_dataset: cannot open " + path);
    Writer w(os);
    w.raw(kMagic, 4);
    w.put<std::uint32_t>(kVersion);
    w.put<std::uint64_t>(samples.size());
    w.put<std::uint32_t>(dim);

    for (const auto& s : samples) {
        std::size_t t_len = s.frames.rows;
        w.put<std::uint8_t>(static_cast<std::uint8_t>(s.style));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(t_len));
        w.put<std::uint8_t>(static_cast<std::uint8_t>(s.query.n_choices));
        w.put<std::uint8_t>(static_cast<std::uint8_t>(s.query.correct_option));
        w.put<std::uint16_t>(static_cast<std::uint16_t>(s.query.required_groups.size()));
        for (const auto& g : s.query.required_groups) {
            w.put<std::uint16_t>(static_cast<std::uint16_t>(g.threshold));
            w.put<std::uint32_t>(static_cast<std::uint32_t>(g.frames.size()));
            for (std::size_t f : g.frames) w.put<std::uint32_t>(static_cast<std::uint32_t>(f));
        }
        std::vector<char> mask((t_len + 7) / 8, 0);
        for (std::size_t t = 0; t < t_len; ++t)
            if (s.target_mask[t]) mask[t / 8] |= static_cast<char>(1u << (t % 8));
        w.raw(mask.data(), mask.size());
        for (double v : s.query.embedding) w.put<float>(static_cast<float>(v));
        for (double v : s.frames.data) w.put<float>(static_cast<float>(v));
    }
    if (!os) throw std::runtime_error("write_dataset: write failed for " + path);
    return samples.size();
}

std::vector<SpliceSample> read_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary | std::ios::ate);
    if (!is) throw std::runtime_error("read_dataset: cannot open " + path);
    std::uint64_t size = static_cast<std::uint64_t>(is.tellg());
    is.seekg(0);
    Reader r(is, size);

    char magic[4];
    r.raw(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic", 0);
    std::uint32_t version = r.get<std::uint32_t>("version");
    if (version != kVersion) throw FormatError("unsupported format version", 4);
    std::uint64_t count = r.get<std::uint64_t>("record count");
    std::uint32_t dim = r.get<std::uint32_t>("feature dim");

    std::vector<SpliceSample> samples;
    samples.reserve(count);
    for (std::uint64_t rec = 0; rec < count; ++rec) {
        SpliceSample s;
        std::uint8_t style = r.get<std::uint8_t>("style");
        if (style > 1) throw FormatError("bad style tag", r.offset() - 1);
        s.style = static_cast<world::Style>(style);
        std::uint32_t t_len = r.get<std::uint32_t>("frame count");
        s.query.n_choices = r.get<std::uint8_t>("n_choices");
        s.query.correct_option = r.get<std::uint8_t>("correct option");
        std::uint16_t n_groups = r.get<std::uint16_t>("group count");
        for (std::uint16_t g = 0; g < n_groups; ++g) {
            world::RequiredGroup grp;
            grp.threshold = r.get<std::uint16_t>("group threshold");
            std::uint32_t n = r.get<std::uint32_t>("group size");
            grp.frames.resize(n);
            for (std::uint32_t i = 0; i < n; ++i) {
                std::uint32_t f = r.get<std::uint32_t>("group index");
                if (f >= t_len) throw FormatError("group index out of range", r.offset() - 4);
                grp.frames[i] = f;
            }
            s.query.required_groups.push_back(std::move(grp));
        }
        std::vector<char> mask((t_len + 7) / 8);
        r.raw(mask.data(), mask.size(), "target mask");
        s.target_mask.assign(t_len, false);
        for (std::uint32_t t = 0; t < t_len; ++t)
            s.target_mask[t] = (mask[t / 8] >> (t % 8)) & 1;
        s.query.embedding.resize(dim);
        for (std::uint32_t i = 0; i < dim; ++i)
            s.query.embedding[i] = r.get<float>("query embedding");
        s.frames = Matrix(t_len, dim);
        for (double& v : s.frames.data) v = r.get<float>("frame features");
        s.query.style = s.style;
        s.answer_key = s.query.correct_option;
        samples.push_back(std::move(s));
    }
    if (r.offset() != size) throw FormatError("trailing bytes after last record", r.offset());
    return samples;
}

std::vector<SpliceSample> build_dataset(const world::WorldConfig& world_cfg,
                                        const DatasetRecipe& recipe,
                                        const world::OracleConfig& oracle, Rng& rng,
                                        DatasetStats* stats_out) {
    world_cfg.validate();
    if (recipe.n_samples == 0) throw InvalidArgumentError("build_dataset: n_samples must be >= 1");
    if (recipe.segments_min < recipe.target_events + 1 || recipe.segments_max < recipe.segments_min)
        throw InvalidArgumentError("build_dataset: bad segments range");

    DatasetStats stats;
    std::vector<SpliceSample> kept;
    std::size_t budget = recipe.attempt_budget_factor * recipe.n_samples;
    while (kept.size() < recipe.n_samples && stats.attempts < budget) {
        ++stats.attempts;
        bool needle = rng.uniform01() < recipe.needle_fraction;
        SpliceSample sample;
        if (needle) {
            world::SyntheticVideo target = world::generate_clip(world_cfg, recipe.target_events, rng);
            std::size_t span = recipe.segments_max - recipe.segments_min + 1;
            std::size_t n_segments = recipe.segments_min + rng.uniform_index(span);
            std::vector<world::SyntheticVideo> distractors;
            for (std::size_t i = recipe.target_events; i < n_segments; ++i)
                distractors.push_back(world::generate_clip(world_cfg, 1, rng));
            std::vector<std::size_t> targets(target.event_vectors.size());
            for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = i;
            world::QueryItem query = world::make_query(target, targets, world_cfg, rng,
                                                       oracle.needle_threshold, world::Style::needle);
            sample = build_needle_sample(target, distractors, query, rng);
        } else {
            std::size_t span = recipe.comprehensive_events_max - recipe.comprehensive_events_min + 1;
            std::size_t n_events = recipe.comprehensive_events_min + rng.uniform_index(span);
            world::SyntheticVideo video = world::generate_clip(world_cfg, n_events, rng);
            std::size_t max_targets = std::min<std::size_t>(4, n_events);
            std::size_t k = max_targets <= 2 ? max_targets : 2 + rng.uniform_index(max_targets - 1);
            // distinct target events via partial shuffle
            std::vector<std::size_t> ids(n_events);
            for (std::size_t i = 0; i < n_events; ++i) ids[i] = i;
            for (std::size_t i = 0; i < k; ++i)
                std::swap(ids[i], ids[i + rng.uniform_index(n_events - i)]);
            ids.resize(k);
            std::sort(ids.begin(), ids.end());
            sample.query = world::make_query(video, ids, world_cfg, rng,
                                             oracle.comprehensive_threshold,
                                             world::Style::comprehensive);
            sample.frames = video.frames;
            sample.style = world::Style::comprehensive;
            sample.answer_key = sample.query.correct_option;
            sample.target_mask.assign(video.frames.rows, false);
            for (const auto& g : sample.query.required_groups)
                for (std::size_t f : g.frames) sample.target_mask[f] = true;
        }
        switch (difficulty_filter(sample, oracle)) {
            case FilterVerdict::keep:
                ++stats.kept;
                kept.push_back(std::move(sample));
                break;
            case FilterVerdict::drop_too_easy:
                ++stats.dropped_too_easy;
                break;
            case FilterVerdict::drop_too_hard:
                ++stats.dropped_too_hard;
                break;
        }
    }
    if (stats_out) *stats_out = stats;
    if (kept.size() < recipe.n_samples)
        throw GenerationExhaustedError("build_dataset: attempt budget exhausted with " +
                                       std::to_string(kept.size()) + " of " +
                                       std::to_string(recipe.n_samples) + " samples");
    return kept;
}

std::string stats_report(const DatasetStats& stats) {
    std::ostringstream os;
    os << "attempts " << stats.attempts << "\n"
       << "kept " << stats.kept << "\n"
       << "dropped_too_easy " << stats.dropped_too_easy << "\n"
       << "dropped_too_hard " << stats.dropped_too_hard << "\n";
    return os.str();
}

}  // namespace tspo::data
