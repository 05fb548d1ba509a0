#pragma once

#include <cstddef>
#include <vector>

#include "polarseg/autodiff.hpp"

namespace polarseg::ad {

// Cross-correlation over NCHW input. weight is [O, C, k, k], bias is [O] or null.
// Output spatial size is floor((H + 2p - k) / stride) + 1.
Var conv2d(const Var& input, const Var& weight, const Var& bias, std::size_t stride,
           std::size_t padding);

// 1x1 convolution with `groups` groups and one output channel per group.
// input is [N, G*C, H, W], weight is [G, C], bias is [G] or null; output [N, G, H, W].
Var grouped_conv1x1(const Var& input, const Var& weight, const Var& bias, std::size_t groups);

// Bilinear interpolation of a [C, H, W] map at K fractional (x, y) grid
// coordinates given as [K, 2]; integer coordinates are cell centres. Taps
// outside the map read zero. Differentiable in both the map and the points.
Var bilinear_sample(const Var& features, const Var& points);

Var relu(const Var& x);
Var sigmoid(const Var& x);
Var exp(const Var& x);
// x * s for a one-element tensor s.
Var scalar_scale(const Var& x, const Var& s);
Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double c);
Var clamp_min(const Var& x, double lo);
Var sum(const Var& x);

Var reshape(const Var& x, Shape shape);
Var detach(const Var& x);

// Nearest-neighbour resize of [N, C, H, W] to [N, C, out_h, out_w].
Var upsample_nearest(const Var& x, std::size_t out_h, std::size_t out_w);

// Picks spatial cells from a [C, H, W] (or [1, C, H, W]) map: result [P, C]
// where row p is the channel vector at flat cell index cells[p].
Var gather_cells(const Var& x, const std::vector<std::size_t>& cells);

// Stacks tensors along their first dimension; trailing sizes must agree.
Var concat_rows(const std::vector<Var>& parts);

// Ray end points for P poles with n radii each: point (p, k) sits at
// (x_p + r_pk sin(t_k) / stride, y_p + r_pk cos(t_k) / stride) with
// t_k = (k + 1) * 2 pi / n. radii [P, n] -> points [P * n, 2].
Var polar_to_grid(const Var& radii, const std::vector<double>& pole_x,
                  const std::vector<double>& pole_y, double stride);

double ray_angle(std::size_t k, std::size_t n);

}  // namespace polarseg::ad
