//! Task names, question types and benchmark levels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

macro_rules! tasks {
    ($($variant:ident => $name:literal),* $(,)?) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Task {
            $($variant),*
        }

        impl Task {
            pub const ALL: &'static [Task] = &[$(Task::$variant),*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Task::$variant => $name),*
                }
            }
        }

        impl FromStr for Task {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok(Task::$variant),)*
                    _ => Err(format!("unknown task {s:?}")),
                }
            }
        }
    };
}

tasks! {
    DepthOc => "Depth-OC",
    DepthOcMv => "Depth-OC-MV",
    DepthOo => "Depth-OO",
    DepthOoMv => "Depth-OO-MV",
    DistOc => "Dist-OC",
    DistOcMv => "Dist-OC-MV",
    DistOo => "Dist-OO",
    DistOoMv => "Dist-OO-MV",
    PosMatch => "PosMatch",
    CamMotion => "CamMotion",
    ViewChgI => "ViewChgI",
    DistIOo => "DistI-OO",
    DistIOoMv => "DistI-OO-MV",
    ObjRelOcMv => "ObjRel-OC-MV",
    ObjRelOo => "ObjRel-OO",
    ObjRelOoMv => "ObjRel-OO-MV",
    SpImagOc => "SpImag-OC",
    SpImagOcMv => "SpImag-OC-MV",
    SpImagOo => "SpImag-OO",
    SpImagOoMv => "SpImag-OO-MV",
    Volume => "Volume",
    ObjFrameLoc => "ObjFrameLoc",
    AppearOrder => "AppearOrder",
    ObjCount => "ObjCount",
    RoomSize => "RoomSize",
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskLevel {
    Low,
    Medium,
    High,
}

impl TaskLevel {
    pub const ALL: [TaskLevel; 3] = [TaskLevel::Low, TaskLevel::Medium, TaskLevel::High];

    pub fn name(self) -> &'static str {
        match self {
            TaskLevel::Low => "Low",
            TaskLevel::Medium => "Medium",
            TaskLevel::High => "High",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaType {
    Fill,
    Select,
    Sentence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewMode {
    Single,
    Multi,
}

/// How benchmark answers of a task are scored.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    /// Relative accuracy on a number.
    Mra,
    /// Exact choice accuracy.
    Accuracy,
}

impl Task {
    /// The 20 benchmark tasks in report column order.
    pub const BENCHMARK: [Task; 20] = [
        Task::DepthOc,
        Task::DepthOcMv,
        Task::DepthOo,
        Task::DepthOoMv,
        Task::DistOc,
        Task::DistOcMv,
        Task::DistOo,
        Task::DistOoMv,
        Task::PosMatch,
        Task::CamMotion,
        Task::ViewChgI,
        Task::DistIOo,
        Task::DistIOoMv,
        Task::ObjRelOcMv,
        Task::ObjRelOo,
        Task::ObjRelOoMv,
        Task::SpImagOc,
        Task::SpImagOcMv,
        Task::SpImagOo,
        Task::SpImagOoMv,
    ];

    pub fn level(self) -> Option<TaskLevel> {
        use Task::*;
        match self {
            DepthOc | DepthOcMv | DepthOo | DepthOoMv | DistOc | DistOcMv | DistOo | DistOoMv => Some(TaskLevel::Low),
            PosMatch | CamMotion | ViewChgI => Some(TaskLevel::Medium),
            DistIOo | DistIOoMv | ObjRelOcMv | ObjRelOo | ObjRelOoMv | SpImagOc | SpImagOcMv | SpImagOo
            | SpImagOoMv => Some(TaskLevel::High),
            Volume | ObjFrameLoc | AppearOrder | ObjCount | RoomSize => None,
        }
    }

    pub fn metric(self) -> Metric {
        use Task::*;
        match self {
            DepthOc | DepthOcMv | DepthOo | DepthOoMv | DistOc | DistOcMv | DistOo | DistOoMv | ViewChgI | Volume
            | ObjCount | RoomSize => Metric::Mra,
            _ => Metric::Accuracy,
        }
    }

    /// The question type used when the task is benchmarked.
    pub fn benchmark_qa_type(self) -> QaType {
        match self.metric() {
            Metric::Mra => QaType::Fill,
            Metric::Accuracy => QaType::Select,
        }
    }

    pub fn view_mode(self) -> ViewMode {
        use Task::*;
        match self {
            DepthOc | DepthOo | DistOc | DistOo | DistIOo | ObjRelOo | SpImagOc | SpImagOo | Volume => ViewMode::Single,
            _ => ViewMode::Multi,
        }
    }

    /// Tasks built on exactly two views.
    pub fn is_pair_task(self) -> bool {
        matches!(self, Task::PosMatch | Task::CamMotion | Task::ViewChgI)
    }

    /// The name up to the first dash, grouping OC/OO and MV variants.
    pub fn family(self) -> &'static str {
        self.name().split('-').next().unwrap_or(self.name())
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Task {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Task {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for QaType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QaType::Fill => "fill",
            QaType::Select => "select",
            QaType::Sentence => "sentence",
        })
    }
}
