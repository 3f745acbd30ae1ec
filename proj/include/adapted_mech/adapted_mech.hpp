#pragma once

#include "point.hpp"
#include "expr.hpp"
#include "frame.hpp"
#include "forms.hpp"
#include "lagrangian.hpp"
#include "hamiltonian.hpp"
#include "integrate.hpp"
#include "verify.hpp"
#include "config.hpp"
#include "system.hpp"
#include "io.hpp"
#include "cli.hpp"
