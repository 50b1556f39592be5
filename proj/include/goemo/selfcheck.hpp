#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "goemo/autodiff.hpp"

namespace goemo {

struct NamedGradCheck {
    std::string name;
    ad::GradCheckResult result;
};

struct BiLstmGradCheckShape {
    std::size_t layers = 2;
    std::size_t hidden = 8;
    std::size_t embedding_dim = 5;
    std::size_t num_labels = 3;
    std::vector<std::size_t> lengths{4, 4};  // one example per entry
    double gamma = 2.0;
};

/// Full BiLSTM -> attention -> classify -> focal loss graph on random
/// inputs, dropout off, checked against central differences. Inputs are
/// uniform in +-2 and every parameter is moved by up to +-1 from its
/// initial value: with smaller activations many gradient entries fall
/// near 1e-8, where one ulp of loss round-off at epsilon = 1e-5 already
/// exceeds the 1e-4 relative tolerance.
ad::GradCheckResult check_bilstm_gradients(const BiLstmGradCheckShape& shape, std::uint64_t seed,
                                           double epsilon = 1e-5);

/// Every differentiable component on toy shapes: LSTM cell, full model with
/// and without padding, both losses, and the dense head.
std::vector<NamedGradCheck> run_gradient_suite(std::uint64_t seed);

}  // namespace goemo
