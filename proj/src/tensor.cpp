#include "sggan/tensor.hpp"

// Tensor is header-only; this TU anchors the header for the build.
