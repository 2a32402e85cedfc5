//! Embedded episodic-memory store.
//!
//! Layout under the store root:
//!
//! ```text
//! blobs/<sha256>
//! tasks/<task-id>/task.json
//! tasks/<task-id>/episodes/<episode-id>/episode.json
//!                                      /frames.log    append-only frame records
//!                                      /frames.idx    packed time index, written at seal
//!                                      /ranges.json   per-entity pose-change frame ranges, written at seal
//!                                      /events.ndjson
//! ```
//!
//! A frame record is a 16-byte header (little-endian `f64` time, `u32`
//! payload length, `u32` CRC-32 of the payload) followed by the frame JSON.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::event_index::{EventFilter, EventIndex};
use super::frame_index::FrameIndex;
use crate::error::{Error, Result};
use crate::model::{EntityDescriptor, EntityId, EntitySet, EntitySpec, Event, Frame, IdMinter, Interval, Pose};

const HEADER: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: EntityId,
    pub name: String,
    pub entities: Vec<EntityDescriptor>,
    pub episodes: Vec<EntityId>,
}

impl Task {
    pub fn entity_set(&self) -> Result<EntitySet> {
        EntitySet::new(self.entities.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub id: EntityId,
    pub task: EntityId,
    pub frame_count: usize,
    pub time_range: Option<Interval>,
    pub sealed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_rate: Option<f64>,
}

/// Query answer; `provisional` is set while the episode is still being written.
#[derive(Debug, Clone, PartialEq)]
pub struct Answer<T> {
    pub value: T,
    pub provisional: bool,
}

/// Frame-range secondary index: for each entity, inclusive runs of frame
/// positions at which its pose differed from the previous frame.
pub type PoseRanges = BTreeMap<EntityId, Vec<(usize, usize)>>;

#[derive(Debug)]
struct Writer {
    log: BufWriter<File>,
    events: BufWriter<File>,
    offset: u64,
    prev_poses: BTreeMap<EntityId, Pose>,
}

#[derive(Debug)]
struct EpisodeState {
    meta: Episode,
    dir: PathBuf,
    index: FrameIndex,
    ranges: PoseRanges,
    events: EventIndex,
    entities: EntitySet,
    writer: Option<Writer>,
}

impl EpisodeState {
    fn log_path(&self) -> PathBuf {
        self.dir.join("frames.log")
    }

    fn refresh_meta(&mut self) {
        self.meta.frame_count = self.index.len();
        self.meta.time_range = match (self.index.first(), self.index.last()) {
            (Some(a), Some(b)) => Some(Interval { start: a, end: b }),
            _ => None,
        };
    }
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    minter: IdMinter,
    tasks: BTreeMap<EntityId, Task>,
    episodes: BTreeMap<EntityId, EpisodeState>,
}

fn corrupt(path: &Path, message: impl Into<String>) -> Error {
    Error::Corrupt {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| corrupt(path, e.to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, serde_json::to_vec_pretty(value)?)?;
    fs::rename(tmp, path)?;
    Ok(())
}

fn encode_record(frame: &Frame) -> Result<Vec<u8>> {
    let payload = serde_json::to_vec(frame)?;
    let mut rec = Vec::with_capacity(HEADER + payload.len());
    rec.extend_from_slice(&frame.t.to_le_bytes());
    rec.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    rec.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    rec.extend_from_slice(&payload);
    Ok(rec)
}

/// Scans a frame log, returning the index of whole valid records and the
/// byte length they span. A torn trailing record is ignored.
fn scan_log(path: &Path) -> Result<(FrameIndex, u64, Vec<Frame>)> {
    let mut idx = FrameIndex::new();
    let mut frames = Vec::new();
    let Ok(file) = File::open(path) else {
        return Ok((idx, 0, frames));
    };
    let mut r = BufReader::new(file);
    let mut offset = 0u64;
    loop {
        let mut head = [0u8; HEADER];
        if r.read_exact(&mut head).is_err() {
            break;
        }
        let t = f64::from_le_bytes(head[..8].try_into().expect("8 bytes"));
        let len = u32::from_le_bytes(head[8..12].try_into().expect("4 bytes")) as usize;
        let crc = u32::from_le_bytes(head[12..].try_into().expect("4 bytes"));
        let mut payload = vec![0u8; len];
        if r.read_exact(&mut payload).is_err() || crc32fast::hash(&payload) != crc {
            break;
        }
        let frame: Frame = serde_json::from_slice(&payload).map_err(|e| corrupt(path, e.to_string()))?;
        idx.push(t, offset).map_err(|e| corrupt(path, e.to_string()))?;
        frames.push(frame);
        offset += (HEADER + len) as u64;
    }
    Ok((idx, offset, frames))
}

fn pose_ranges(frames: &[Frame]) -> PoseRanges {
    let mut ranges = PoseRanges::new();
    for (k, pair) in frames.windows(2).enumerate() {
        extend_ranges(&mut ranges, &pair[0].poses, &pair[1], k + 1);
    }
    ranges
}

fn extend_ranges(ranges: &mut PoseRanges, prev: &BTreeMap<EntityId, Pose>, frame: &Frame, k: usize) {
    for (id, pose) in &frame.poses {
        if prev.get(id).is_some_and(|p| p != pose) {
            let runs = ranges.entry(*id).or_default();
            match runs.last_mut() {
                Some(last) if last.1 + 1 == k => last.1 = k,
                _ => runs.push((k, k)),
            }
        }
    }
}

impl Store {
    /// Opens (creating if needed) the store at `root`. A seed makes every
    /// minted id deterministic.
    pub fn open(root: impl AsRef<Path>, seed: Option<u64>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("tasks"))?;
        fs::create_dir_all(root.join("blobs"))?;
        let mut store = Store {
            root,
            minter: IdMinter::from_seed(seed),
            tasks: BTreeMap::new(),
            episodes: BTreeMap::new(),
        };
        let mut dirs: Vec<PathBuf> = fs::read_dir(store.root.join("tasks"))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("task.json").is_file())
            .collect();
        dirs.sort();
        for dir in dirs {
            let task: Task = read_json(&dir.join("task.json"))?;
            let entities = task.entity_set()?;
            for ep in &task.episodes {
                let edir = dir.join("episodes").join(ep.to_string());
                let state = store.load_episode(&edir, entities.clone())?;
                store.episodes.insert(*ep, state);
            }
            store.tasks.insert(task.id, task);
        }
        Ok(store)
    }

    fn load_episode(&self, dir: &Path, entities: EntitySet) -> Result<EpisodeState> {
        let meta: Episode = read_json(&dir.join("episode.json"))?;
        let log = dir.join("frames.log");
        let (index, ranges) = if meta.sealed {
            let bytes = fs::read(dir.join("frames.idx"))?;
            let index = FrameIndex::decode(&bytes).map_err(|m| corrupt(&dir.join("frames.idx"), m))?;
            if index.len() != meta.frame_count {
                return Err(corrupt(&dir.join("frames.idx"), "frame count disagrees with episode.json"));
            }
            (index, read_json(&dir.join("ranges.json"))?)
        } else {
            let (index, _, frames) = scan_log(&log)?;
            (index, pose_ranges(&frames))
        };
        let mut events = EventIndex::new();
        if let Ok(f) = File::open(dir.join("events.ndjson")) {
            for line in BufReader::new(f).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Event>(&line) {
                    Ok(e) => events.insert(e),
                    Err(_) if !meta.sealed => break,
                    Err(e) => return Err(corrupt(&dir.join("events.ndjson"), e.to_string())),
                }
            }
        }
        let mut state = EpisodeState {
            meta,
            dir: dir.to_path_buf(),
            index,
            ranges,
            events,
            entities,
            writer: None,
        };
        state.refresh_meta();
        Ok(state)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn minter(&self) -> IdMinter {
        self.minter
    }

    fn task_dir(&self, task: &EntityId) -> PathBuf {
        self.root.join("tasks").join(task.to_string())
    }

    pub fn tasks(&self) -> impl Iterator<Item = &Task> {
        self.tasks.values()
    }

    pub fn task(&self, id: &EntityId) -> Result<&Task> {
        self.tasks.get(id).ok_or_else(|| Error::NotFound(format!("task {id}")))
    }

    pub fn task_by_name(&self, name: &str) -> Option<&Task> {
        self.tasks.values().find(|t| t.name == name)
    }

    /// Registers a task, minting ids for every entity.
    pub fn create_task(&mut self, name: &str, specs: &[EntitySpec]) -> Result<Task> {
        let id = self.minter.task_id(name);
        let descriptors = EntitySpec::mint_all(specs, &self.minter, id)?;
        self.register_task(id, name, descriptors)
    }

    /// Registers a task whose entities already carry ids (e.g. from a trace header).
    pub fn create_task_with(&mut self, name: &str, descriptors: Vec<EntityDescriptor>) -> Result<Task> {
        let id = self.minter.task_id(name);
        self.register_task(id, name, descriptors)
    }

    fn register_task(&mut self, id: EntityId, name: &str, descriptors: Vec<EntityDescriptor>) -> Result<Task> {
        if name.trim().is_empty() {
            return Err(Error::validation("task name must not be empty"));
        }
        if self.task_by_name(name).is_some() {
            return Err(Error::Conflict(format!("task {name:?} already exists")));
        }
        let set = EntitySet::new(descriptors)?;
        let taken: BTreeSet<EntityId> = self
            .tasks
            .values()
            .flat_map(|t| t.entities.iter().map(|d| d.id).chain([t.id]))
            .collect();
        if taken.contains(&id) {
            return Err(Error::Conflict(format!("task id {id} already in use")));
        }
        if let Some(d) = set.iter().find(|d| taken.contains(&d.id) || d.id == id) {
            return Err(Error::Conflict(format!("entity id {} ({}) already in use", d.id, d.name)));
        }
        let task = Task {
            id,
            name: name.to_string(),
            entities: set.descriptors().to_vec(),
            episodes: Vec::new(),
        };
        let dir = self.task_dir(&id);
        fs::create_dir_all(dir.join("episodes"))?;
        write_json(&dir.join("task.json"), &task)?;
        self.tasks.insert(id, task.clone());
        Ok(task)
    }

    pub fn create_episode(&mut self, task: &EntityId, frame_rate: Option<f64>) -> Result<Episode> {
        let t = self.task(task)?.clone();
        let id = self.minter.episode_id(t.id, t.episodes.len());
        if self.episodes.contains_key(&id) {
            return Err(Error::Conflict(format!("episode id {id} already in use")));
        }
        let dir = self.task_dir(task).join("episodes").join(id.to_string());
        fs::create_dir_all(&dir)?;
        let meta = Episode {
            id,
            task: t.id,
            frame_count: 0,
            time_range: None,
            sealed: false,
            frame_rate,
        };
        write_json(&dir.join("episode.json"), &meta)?;
        File::create(dir.join("frames.log"))?;
        File::create(dir.join("events.ndjson"))?;
        let entities = t.entity_set()?;
        self.episodes.insert(
            id,
            EpisodeState {
                meta: meta.clone(),
                dir,
                index: FrameIndex::new(),
                ranges: PoseRanges::new(),
                events: EventIndex::new(),
                entities,
                writer: None,
            },
        );
        let task = self.tasks.get_mut(task).expect("checked above");
        task.episodes.push(id);
        let task = task.clone();
        write_json(&self.task_dir(&task.id).join("task.json"), &task)?;
        Ok(meta)
    }

    fn state(&self, ep: &EntityId) -> Result<&EpisodeState> {
        self.episodes.get(ep).ok_or_else(|| Error::NotFound(format!("episode {ep}")))
    }

    fn writable(&mut self, ep: &EntityId) -> Result<&mut EpisodeState> {
        let st = self
            .episodes
            .get_mut(ep)
            .ok_or_else(|| Error::NotFound(format!("episode {ep}")))?;
        if st.meta.sealed {
            return Err(Error::State(format!("episode {ep} is sealed")));
        }
        if st.writer.is_none() {
            let (_, valid, frames) = scan_log(&st.log_path())?;
            let log = OpenOptions::new().write(true).open(st.log_path())?;
            log.set_len(valid)?;
            let mut log = BufWriter::new(log);
            log.seek(SeekFrom::Start(valid))?;
            let events = OpenOptions::new().append(true).create(true).open(st.dir.join("events.ndjson"))?;
            st.writer = Some(Writer {
                log,
                events: BufWriter::new(events),
                offset: valid,
                prev_poses: frames.last().map(|f| f.poses.clone()).unwrap_or_default(),
            });
        }
        Ok(st)
    }

    pub fn episode(&self, ep: &EntityId) -> Result<&Episode> {
        Ok(&self.state(ep)?.meta)
    }

    pub fn episodes(&self) -> impl Iterator<Item = &Episode> {
        self.episodes.values().map(|s| &s.meta)
    }

    pub fn entities(&self, ep: &EntityId) -> Result<&EntitySet> {
        Ok(&self.state(ep)?.entities)
    }

    pub fn append_frame(&mut self, ep: &EntityId, frame: &Frame) -> Result<()> {
        let st = self.writable(ep)?;
        if let Some(last) = st.index.last() {
            if !(frame.t > last) {
                return Err(Error::validation(format!(
                    "frame time {} is not after the previous frame time {last}",
                    frame.t
                )));
            }
        }
        if let Some(id) = frame.referenced_ids().into_iter().find(|id| !st.entities.contains(id)) {
            return Err(Error::validation(format!("frame at t={} references unknown entity {id}", frame.t)));
        }
        let rec = encode_record(frame)?;
        let w = st.writer.as_mut().expect("writable episode has a writer");
        w.log.write_all(&rec)?;
        w.log.flush()?;
        let offset = w.offset;
        w.offset += rec.len() as u64;
        let k = st.index.len();
        st.index.push(frame.t, offset)?;
        extend_ranges(&mut st.ranges, &w.prev_poses, frame, k);
        w.prev_poses = frame.poses.clone();
        st.refresh_meta();
        Ok(())
    }

    pub fn store_event(&mut self, ep: &EntityId, event: &Event) -> Result<()> {
        let st = self.writable(ep)?;
        event.validate()?;
        let tol = st.meta.frame_rate.map_or(1.0 / 90.0, |r| 1.0 / r);
        let range = st
            .meta
            .time_range
            .ok_or_else(|| Error::validation("cannot store events before the first frame"))?;
        if !range.contains_interval(&event.interval(), tol) {
            return Err(Error::validation(format!(
                "event [{}, {}] lies outside the episode time range [{}, {}]",
                event.start, event.end, range.start, range.end
            )));
        }
        if let Some(id) = event.participants.ids().find(|id| !st.entities.contains(id)) {
            return Err(Error::validation(format!("event references unknown entity {id}")));
        }
        let w = st.writer.as_mut().expect("writable episode has a writer");
        w.events.write_all(event.to_ndjson().as_bytes())?;
        w.events.write_all(b"\n")?;
        w.events.flush()?;
        st.events.insert(event.clone());
        Ok(())
    }

    /// Finalizes an episode: writes the packed index and the pose ranges and
    /// marks it immutable.
    pub fn seal_episode(&mut self, ep: &EntityId) -> Result<Episode> {
        let st = self.writable(ep)?;
        if let Some(mut w) = st.writer.take() {
            w.log.flush()?;
            w.log.get_ref().sync_all()?;
            w.events.flush()?;
            w.events.get_ref().sync_all()?;
        }
        fs::write(st.dir.join("frames.idx"), st.index.encode())?;
        write_json(&st.dir.join("ranges.json"), &st.ranges)?;
        st.refresh_meta();
        st.meta.sealed = true;
        write_json(&st.dir.join("episode.json"), &st.meta)?;
        Ok(st.meta.clone())
    }

    fn read_frame(&self, st: &EpisodeState, k: usize, file: &mut File) -> Result<Frame> {
        let path = st.log_path();
        file.seek(SeekFrom::Start(st.index.offset(k)))?;
        let mut head = [0u8; HEADER];
        file.read_exact(&mut head)?;
        let t = f64::from_le_bytes(head[..8].try_into().expect("8 bytes"));
        let len = u32::from_le_bytes(head[8..12].try_into().expect("4 bytes")) as usize;
        let crc = u32::from_le_bytes(head[12..].try_into().expect("4 bytes"));
        let mut payload = vec![0u8; len];
        file.read_exact(&mut payload)?;
        if crc32fast::hash(&payload) != crc || t != st.index.time(k) {
            return Err(corrupt(&path, format!("record {k} fails its checksum")));
        }
        serde_json::from_slice(&payload).map_err(|e| corrupt(&path, e.to_string()))
    }

    /// Latest frame at or before `t`, with the index probe count.
    pub fn frame_at_probed(&self, ep: &EntityId, t: f64) -> Result<(Frame, usize)> {
        let st = self.state(ep)?;
        let (k, probes) = st.index.predecessor(t);
        let k = k.ok_or_else(|| Error::NotFound(format!("no frame at or before t={t} in episode {ep}")))?;
        let mut file = File::open(st.log_path())?;
        Ok((self.read_frame(st, k, &mut file)?, probes))
    }

    pub fn frame_at(&self, ep: &EntityId, t: f64) -> Result<Frame> {
        self.frame_at_probed(ep, t).map(|(f, _)| f)
    }

    /// Frames with `start ≤ t ≤ end`, in time order.
    pub fn frames_in(&self, ep: &EntityId, interval: &Interval) -> Result<Vec<Frame>> {
        let st = self.state(ep)?;
        let range = st.index.range(interval.start, interval.end);
        let mut file = File::open(st.log_path())?;
        range.map(|k| self.read_frame(st, k, &mut file)).collect()
    }

    /// Every frame of the episode.
    pub fn frames(&self, ep: &EntityId) -> Result<Vec<Frame>> {
        let st = self.state(ep)?;
        let mut file = File::open(st.log_path())?;
        (0..st.index.len()).map(|k| self.read_frame(st, k, &mut file)).collect()
    }

    pub fn frame_times(&self, ep: &EntityId) -> Result<Vec<f64>> {
        let st = self.state(ep)?;
        Ok((0..st.index.len()).map(|k| st.index.time(k)).collect())
    }

    /// Time spans during which `entity` was moving, from the pose-change index.
    pub fn pose_changes(&self, ep: &EntityId, entity: &EntityId) -> Result<Vec<Interval>> {
        let st = self.state(ep)?;
        if !st.entities.contains(entity) {
            return Err(Error::NotFound(format!("entity {entity}")));
        }
        Ok(st
            .ranges
            .get(entity)
            .map(|runs| {
                runs.iter()
                    .map(|&(a, b)| Interval {
                        start: st.index.time(a),
                        end: st.index.time(b),
                    })
                    .collect()
            })
            .unwrap_or_default())
    }

    pub fn events_by(&self, ep: &EntityId, filter: &EventFilter) -> Result<Answer<Vec<Event>>> {
        let st = self.state(ep)?;
        Ok(Answer {
            value: st.events.query(filter),
            provisional: !st.meta.sealed,
        })
    }

    /// Looks an event up by id across all episodes.
    pub fn event(&self, id: &EntityId) -> Result<(EntityId, &Event)> {
        self.episodes
            .iter()
            .find_map(|(ep, st)| st.events.get(id).map(|e| (*ep, e)))
            .ok_or_else(|| Error::NotFound(format!("event {id}")))
    }

    /// Stores an opaque asset; returns its content hash.
    pub fn put_blob(&self, bytes: &[u8]) -> Result<String> {
        let hash = hex::encode(Sha256::digest(bytes));
        let path = self.root.join("blobs").join(&hash);
        if !path.exists() {
            let tmp = path.with_extension("tmp");
            fs::write(&tmp, bytes)?;
            fs::rename(tmp, &path)?;
        }
        Ok(hash)
    }

    pub fn get_blob(&self, hash: &str) -> Result<Vec<u8>> {
        if hash.len() != 64 || !hash.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::validation(format!("malformed blob hash {hash:?}")));
        }
        fs::read(self.root.join("blobs").join(hash)).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(format!("blob {hash}")),
            _ => e.into(),
        })
    }
}
