#pragma once

// Umbrella header: the whole tableau-to-rewriting-induction toolchain.

#include "hoare2ri/pipeline.hpp"
