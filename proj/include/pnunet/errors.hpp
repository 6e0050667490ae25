#pragma once

#include <stdexcept>
#include <string>

namespace pnunet {

// Every library failure derives from Error; kind() is a stable token used in
// the CLI's machine-parsable error line.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error("io", what) {}
};

struct FormatError : Error {
    explicit FormatError(const std::string& what) : Error("format", what) {}
};

struct VersionError : Error {
    explicit VersionError(const std::string& what) : Error("version", what) {}
};

struct CorruptionError : Error {
    explicit CorruptionError(const std::string& what) : Error("corruption", what) {}
};

struct ArgumentError : Error {
    explicit ArgumentError(const std::string& what) : Error("argument", what) {}
};

struct TrainingError : Error {
    explicit TrainingError(const std::string& what) : Error("training", what) {}
};

struct SearchError : Error {
    explicit SearchError(const std::string& what) : Error("search", what) {}
};

struct MetricError : Error {
    explicit MetricError(const std::string& what) : Error("metric", what) {}
};

// Bad run configuration; key_path names the offending field ("trainer.iterations").
class ConfigError : public Error {
public:
    ConfigError(std::string key_path, const std::string& what)
        : Error("config", key_path + ": " + what), key_path_(std::move(key_path)) {}
    const std::string& key_path() const noexcept { return key_path_; }

private:
    std::string key_path_;
};

}  // namespace pnunet
