#pragma once

#include <cstdint>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

#include "hats/env.hpp"

namespace hats {

/// One admitted instruction–trajectory pair.
struct VerifiedSample {
    std::string sample_id;
    std::string instruction_text;
    std::uint32_t revision = 0;
    /// State the execution steps start from.
    StateId start_state;
    std::vector<Step> execution_steps;
    double recall = 0.0;
    double hardness = 0.0;
    AmbiguitySet ambiguity_tags;
    std::string category_tag;
    std::string environment_id;
    std::uint64_t seed = 0;

    friend bool operator==(const VerifiedSample&, const VerifiedSample&) = default;
};

/// Destination for emitted samples.
class SampleSink {
public:
    virtual ~SampleSink() = default;
    virtual void write(const VerifiedSample& sample) = 0;
};

/// Collects samples in memory.
class VectorSink final : public SampleSink {
public:
    void write(const VerifiedSample& sample) override { samples.push_back(sample); }
    std::vector<VerifiedSample> samples;
};

/// Appends one JSON line per sample; safe to share between concurrent runs
/// (each line is written under a lock).
class JsonlSink final : public SampleSink {
public:
    explicit JsonlSink(std::ostream& out) : out_(out) {}
    void write(const VerifiedSample& sample) override;
    std::size_t lines_written() const;

private:
    std::ostream& out_;
    mutable std::mutex mutex_;
    std::size_t lines_ = 0;
};

} // namespace hats
