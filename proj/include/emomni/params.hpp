// params.hpp : ordered named-parameter store shared by all trainable components
#pragma once

#include <map>
#include <string>
#include <vector>

#include "emomni/mat.hpp"

namespace emomni {

// Parameters live in one flat, name-ordered map so checkpointing, stage
// freezing and optimizer sets all operate on plain name prefixes.
class ParamStore {
public:
    bool has(const std::string& name) const { return params_.count(name) != 0; }

    Mat& get(const std::string& name);
    const Mat& get(const std::string& name) const;

    void set(const std::string& name, Mat value) { params_[name] = std::move(value); }
    void erase(const std::string& name) { params_.erase(name); }

    std::vector<std::string> names() const;
    std::vector<std::string> names_with_prefix(const std::string& prefix) const;

    size_t count() const { return params_.size(); }

    const std::map<std::string, Mat>& all() const { return params_; }

private:
    std::map<std::string, Mat> params_;
};

}  // namespace emomni
