#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mimmu::num {

// One named contiguous slice of a flat parameter vector.
struct ParamSlice {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;  // rows*cols == length of the slice
    std::size_t cols = 1;
    std::size_t size() const { return rows * cols; }
};

// Flat 64-bit parameter vector with a layout descriptor. Layout slices
// must be disjoint and cover the vector exactly, in order.
class ParamVector {
   public:
    ParamVector() = default;

    std::size_t add_slice(const std::string& name, std::size_t rows,
                          std::size_t cols = 1) {
        ParamSlice s;
        s.name = name;
        s.offset = values_.size();
        s.rows = rows;
        s.cols = cols;
        layout_.push_back(s);
        values_.resize(values_.size() + s.size(), 0.0);
        return layout_.size() - 1;
    }

    const ParamSlice& slice(std::size_t idx) const { return layout_.at(idx); }
    const ParamSlice& slice(const std::string& name) const {
        for (const auto& s : layout_)
            if (s.name == name) return s;
        throw std::out_of_range("ParamVector: no slice named " + name);
    }

    const std::vector<ParamSlice>& layout() const { return layout_; }

    std::size_t size() const { return values_.size(); }
    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    bool same_layout(const ParamVector& o) const {
        if (layout_.size() != o.layout_.size()) return false;
        for (std::size_t i = 0; i < layout_.size(); ++i) {
            const auto& a = layout_[i];
            const auto& b = o.layout_[i];
            if (a.name != b.name || a.offset != b.offset || a.rows != b.rows ||
                a.cols != b.cols)
                return false;
        }
        return true;
    }

   private:
    std::vector<double> values_;
    std::vector<ParamSlice> layout_;
};

}  // namespace mimmu::num
