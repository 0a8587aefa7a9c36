#pragma once

// Predictor backed by a child process speaking a line protocol on stdin/stdout:
// each request line is one serialized sample, each response line one decimal
// score, and an empty request line ends the session.

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "mfi/core.hpp"

namespace mfi {

struct ExternalPredictorSpec {
    enum class Serialization { sequence_string, image_csv_row };

    std::vector<std::string> command;  // executable followed by its arguments
    double timeout_seconds = 30.0;
    Serialization serialization = Serialization::sequence_string;
};

/// Sequence: the raw characters. Image: row-major pixels joined by commas.
std::string serialize_sample(const Sample &x);

class ExternalPredictor final : public Predictor {
public:
    /// Starts the process. Throws invalid_argument or process_failure.
    explicit ExternalPredictor(ExternalPredictorSpec spec);
    ~ExternalPredictor() override;

    ExternalPredictor(const ExternalPredictor &) = delete;
    ExternalPredictor &operator=(const ExternalPredictor &) = delete;

    /// Throws process_failure, timeout or unparseable_response.
    double score(const Sample &x) const override;
    std::vector<double> score_batch(std::span<const Sample> xs) const override;

    const ExternalPredictorSpec &spec() const noexcept { return spec_; }

private:
    struct Process;

    double request(const Sample &x) const;

    ExternalPredictorSpec spec_;
    std::unique_ptr<Process> process_;
    mutable std::mutex mutex_;  // one request in flight at a time
};

}  // namespace mfi
