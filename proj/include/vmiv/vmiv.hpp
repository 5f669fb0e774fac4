#pragma once

#include "vmiv/combinatorics.hpp"
#include "vmiv/dataset.hpp"
#include "vmiv/design.hpp"
#include "vmiv/error.hpp"
#include "vmiv/estimation.hpp"
#include "vmiv/simulation.hpp"
#include "vmiv/io.hpp"
#include "vmiv/cli.hpp"
