/*
 * Copyright 2026 The Brushwork Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef BRUSHWORK_ERRORS_H_
#define BRUSHWORK_ERRORS_H_

#include <stdexcept>
#include <string>

namespace brushwork {

// Root of every error thrown by the library. The subclasses mirror the
// failure categories callers are expected to tell apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define BRUSHWORK_DEFINE_ERROR(Name)     \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

BRUSHWORK_DEFINE_ERROR(DecodeError);
BRUSHWORK_DEFINE_ERROR(UnsupportedFormatError);
BRUSHWORK_DEFINE_ERROR(PreconditionError);
BRUSHWORK_DEFINE_ERROR(ShapeError);
BRUSHWORK_DEFINE_ERROR(StateError);
BRUSHWORK_DEFINE_ERROR(FormatError);
BRUSHWORK_DEFINE_ERROR(VersionError);
BRUSHWORK_DEFINE_ERROR(CorruptionError);
BRUSHWORK_DEFINE_ERROR(EmptyIndexError);
BRUSHWORK_DEFINE_ERROR(ValidationError);
BRUSHWORK_DEFINE_ERROR(TrainingError);
BRUSHWORK_DEFINE_ERROR(StartupError);
BRUSHWORK_DEFINE_ERROR(IoError);

#undef BRUSHWORK_DEFINE_ERROR

}  // namespace brushwork

#endif  // BRUSHWORK_ERRORS_H_
