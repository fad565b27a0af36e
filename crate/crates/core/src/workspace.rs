//! Locates the named project under the configured workspace roots and
//! collects the source files to be tested.

use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::entity::ExtractedEntities;
use crate::language::TargetLanguage;

/// Directory names never scanned for sources.
const SKIPPED_DIRS: &[&str] = &["target", "build", "dist", "out", "node_modules", "__pycache__", "venv"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    /// Relative to the context's `target_dir`.
    pub relative_path: PathBuf,
    pub content: String,
    pub line_count: usize,
}

impl SourceFile {
    pub fn new(relative_path: impl Into<PathBuf>, content: impl Into<String>) -> Self {
        let content = content.into();
        let line_count = content.lines().count();
        Self { relative_path: relative_path.into(), content, line_count }
    }

    /// Relative path with `/` separators regardless of platform.
    pub fn relative_path_str(&self) -> String {
        slash_path(&self.relative_path)
    }

    pub fn stem(&self) -> &str {
        self.relative_path.file_stem().and_then(|s| s.to_str()).unwrap_or_default()
    }
}

pub(crate) fn slash_path(path: &Path) -> String {
    path.components()
        .filter_map(|c| match c {
            Component::Normal(part) => Some(part.to_string_lossy().into_owned()),
            _ => None,
        })
        .collect::<Vec<_>>()
        .join("/")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectContext {
    pub project_name: String,
    pub root_path: PathBuf,
    pub target_dir: PathBuf,
    pub target_language: TargetLanguage,
    pub sources: Vec<SourceFile>,
}

impl ProjectContext {
    pub fn total_lines(&self) -> usize {
        self.sources.iter().map(|s| s.line_count).sum()
    }
}

#[derive(Debug, Error)]
pub enum LocateError {
    #[error("workspace root {0} does not exist or is not a directory")]
    InvalidRoot(PathBuf),
    #[error("no workspace roots configured")]
    NoRoots,
    #[error("project `{name}` not found under {roots:?}")]
    ProjectNotFound { name: String, roots: Vec<PathBuf> },
    #[error("project name `{name}` matches several directories: {candidates:?}")]
    AmbiguousProject { name: String, candidates: Vec<PathBuf> },
    #[error("subfolder `{subfolder}` not found in project {project}")]
    SubfolderNotFound { project: PathBuf, subfolder: String },
    #[error("no {language} sources found under {dir}")]
    NoSourcesFound { dir: PathBuf, language: TargetLanguage },
    #[error("i/o error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LocateError + '_ {
    move |source| LocateError::Io { path: path.to_path_buf(), source }
}

fn is_hidden(name: &str) -> bool {
    name.starts_with('.')
}

fn child_dirs(dir: &Path) -> Result<Vec<(String, PathBuf)>, LocateError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if is_hidden(&name) || !entry.path().is_dir() {
            continue;
        }
        out.push((name, entry.path()));
    }
    out.sort();
    Ok(out)
}

/// Case-insensitive match of `project_name` directly under any root; exactly
/// one match is required. The subfolder, when given, is looked up as a direct
/// child of the project root first, then as a uniquely named nested directory.
pub fn locate_project(
    entities: &ExtractedEntities,
    workspace_roots: &[PathBuf],
) -> Result<ProjectContext, LocateError> {
    if workspace_roots.is_empty() {
        return Err(LocateError::NoRoots);
    }
    let mut candidates: Vec<PathBuf> = Vec::new();
    for root in workspace_roots {
        if !root.is_dir() {
            return Err(LocateError::InvalidRoot(root.clone()));
        }
        for (name, path) in child_dirs(root)? {
            if name.eq_ignore_ascii_case(&entities.project_name) {
                let canonical = path.canonicalize().map_err(io_err(&path))?;
                if !candidates.contains(&canonical) {
                    candidates.push(canonical);
                }
            }
        }
    }
    let root_path = match candidates.len() {
        0 => {
            return Err(LocateError::ProjectNotFound {
                name: entities.project_name.clone(),
                roots: workspace_roots.to_vec(),
            })
        }
        1 => candidates.remove(0),
        _ => return Err(LocateError::AmbiguousProject { name: entities.project_name.clone(), candidates }),
    };
    let target_dir = match &entities.subfolder {
        None => root_path.clone(),
        Some(sub) => find_subfolder(&root_path, sub)?,
    };
    let project_name = root_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| entities.project_name.clone());
    Ok(ProjectContext {
        project_name,
        root_path,
        target_dir,
        target_language: entities.target_language,
        sources: Vec::new(),
    })
}

fn find_subfolder(root: &Path, subfolder: &str) -> Result<PathBuf, LocateError> {
    let not_found = || LocateError::SubfolderNotFound { project: root.to_path_buf(), subfolder: subfolder.to_string() };
    let direct = child_dirs(root)?;
    if let Some((_, path)) = direct.iter().find(|(name, _)| name == subfolder) {
        return path.canonicalize().map_err(io_err(path));
    }
    if let Some((_, path)) = direct.iter().find(|(name, _)| name.eq_ignore_ascii_case(subfolder)) {
        return path.canonicalize().map_err(io_err(path));
    }
    let nested: Vec<PathBuf> = WalkDir::new(root)
        .min_depth(2)
        .into_iter()
        .filter_entry(|e| !skip_entry(e))
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_dir() && e.file_name().to_string_lossy().eq_ignore_ascii_case(subfolder))
        .map(|e| e.into_path())
        .collect();
    match nested.as_slice() {
        [only] => {
            let canonical = only.canonicalize().map_err(io_err(only))?;
            if canonical.starts_with(root) {
                Ok(canonical)
            } else {
                Err(not_found())
            }
        }
        _ => Err(not_found()),
    }
}

fn skip_entry(entry: &walkdir::DirEntry) -> bool {
    if entry.depth() == 0 {
        return false;
    }
    let name = entry.file_name().to_string_lossy();
    is_hidden(&name) || (entry.file_type().is_dir() && SKIPPED_DIRS.contains(&name.as_ref()))
}

/// Recursively collects the language's sources under `target_dir`, skipping
/// existing tests, hidden and build directories, and files that are not UTF-8.
/// Results are sorted by relative path.
pub fn collect_sources(mut context: ProjectContext) -> Result<ProjectContext, LocateError> {
    let target = context.target_dir.canonicalize().map_err(io_err(&context.target_dir))?;
    let language = context.target_language;
    let ext = language.source_extension();
    let mut sources = Vec::new();
    for entry in WalkDir::new(&target).into_iter().filter_entry(|e| !skip_entry(e)) {
        let entry = match entry {
            Ok(e) => e,
            Err(err) => {
                tracing::warn!("skipping unreadable entry: {err}");
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) != Some(ext) {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        if language.is_test_stem(stem) {
            continue;
        }
        // symlinked files must still resolve inside the target directory
        match path.canonicalize() {
            Ok(real) if real.starts_with(&target) => {}
            _ => continue,
        }
        let bytes = fs::read(path).map_err(io_err(path))?;
        let Ok(content) = String::from_utf8(bytes) else {
            tracing::warn!("skipping non-UTF-8 file {}", path.display());
            continue;
        };
        let relative = path.strip_prefix(&target).unwrap_or(path).to_path_buf();
        sources.push(SourceFile::new(relative, content));
    }
    if sources.is_empty() {
        return Err(LocateError::NoSourcesFound { dir: target, language });
    }
    sources.sort_by(|a, b| a.relative_path.cmp(&b.relative_path));
    context.target_dir = target;
    context.sources = sources;
    Ok(context)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn ent(project: &str, folder: Option<&str>, lang: TargetLanguage) -> ExtractedEntities {
        ExtractedEntities { project_name: project.into(), subfolder: folder.map(Into::into), target_language: lang }
    }

    fn write(path: &Path, content: &str) {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, content).unwrap();
    }

    #[test]
    fn unique_match_is_case_insensitive() {
        let ws = TempDir::new().unwrap();
        fs::create_dir_all(ws.path().join("Experiment")).unwrap();
        fs::create_dir_all(ws.path().join("cinema")).unwrap();
        let ctx = locate_project(&ent("experiment", None, TargetLanguage::Python), &[ws.path().into()]).unwrap();
        assert!(ctx.root_path.ends_with("Experiment"));
        assert_eq!(ctx.target_dir, ctx.root_path);
        assert_eq!(ctx.project_name, "Experiment");
    }

    #[test]
    fn missing_subfolder_and_project() {
        let ws = TempDir::new().unwrap();
        fs::create_dir_all(ws.path().join("Library/management")).unwrap();
        let err = locate_project(&ent("Library", Some("shelving"), TargetLanguage::Java), &[ws.path().into()]);
        assert!(matches!(err, Err(LocateError::SubfolderNotFound { .. })));
        let err = locate_project(&ent("Nope", None, TargetLanguage::Java), &[ws.path().into()]);
        assert!(matches!(err, Err(LocateError::ProjectNotFound { .. })));
        let ok =
            locate_project(&ent("library", Some("Management"), TargetLanguage::Java), &[ws.path().into()]).unwrap();
        assert!(ok.target_dir.ends_with("management"));
    }

    #[test]
    fn nested_subfolder_is_found_when_unique() {
        let ws = TempDir::new().unwrap();
        fs::create_dir_all(ws.path().join("Lib/src/main/java/management")).unwrap();
        let ok = locate_project(&ent("Lib", Some("management"), TargetLanguage::Java), &[ws.path().into()]).unwrap();
        assert!(ok.target_dir.ends_with("src/main/java/management"));
    }

    #[test]
    fn duplicate_projects_are_ambiguous() {
        let a = TempDir::new().unwrap();
        let b = TempDir::new().unwrap();
        fs::create_dir_all(a.path().join("cinema/models")).unwrap();
        fs::create_dir_all(b.path().join("cinema/models")).unwrap();
        match locate_project(
            &ent("cinema", Some("models"), TargetLanguage::Python),
            &[a.path().into(), b.path().into()],
        ) {
            Err(LocateError::AmbiguousProject { candidates, .. }) => assert_eq!(candidates.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
        // the same root listed twice is not ambiguous
        assert!(
            locate_project(&ent("cinema", None, TargetLanguage::Python), &[a.path().into(), a.path().into()]).is_ok()
        );
    }

    #[test]
    fn collect_skips_tests_hidden_and_build_dirs() {
        let ws = TempDir::new().unwrap();
        let p = ws.path().join("proj");
        write(&p.join("calc.py"), "def add(a, b):\n    return a + b\n");
        write(&p.join("util.py"), "X = 1\n");
        write(&p.join("test_old.py"), "def test_x(): pass\n");
        write(&p.join("old_test.py"), "def test_y(): pass\n");
        write(&p.join(".git/hooks/x.py"), "pass\n");
        write(&p.join("__pycache__/calc.py"), "pass\n");
        write(&p.join("README.md"), "hi\n");
        fs::write(p.join("binary.py"), [0xff, 0xfe, 0x00]).unwrap();
        let ctx = locate_project(&ent("proj", None, TargetLanguage::Python), &[ws.path().into()]).unwrap();
        let ctx = collect_sources(ctx).unwrap();
        let names: Vec<_> = ctx.sources.iter().map(|s| s.relative_path_str()).collect();
        assert_eq!(names, ["calc.py", "util.py"]);
        assert_eq!(ctx.total_lines(), 3);
    }

    #[test]
    fn only_tests_means_no_sources() {
        let ws = TempDir::new().unwrap();
        write(&ws.path().join("proj/test_x.py"), "pass\n");
        let ctx = locate_project(&ent("proj", None, TargetLanguage::Python), &[ws.path().into()]).unwrap();
        assert!(matches!(collect_sources(ctx), Err(LocateError::NoSourcesFound { .. })));
    }

    #[test]
    fn java_test_classes_are_excluded() {
        let ws = TempDir::new().unwrap();
        write(&ws.path().join("Lib/mgmt/Book.java"), "class Book {}\n");
        write(&ws.path().join("Lib/mgmt/BookTest.java"), "class BookTest {}\n");
        write(&ws.path().join("Lib/mgmt/notes.py"), "pass\n");
        let ctx = locate_project(&ent("Lib", Some("mgmt"), TargetLanguage::Java), &[ws.path().into()]).unwrap();
        let ctx = collect_sources(ctx).unwrap();
        assert_eq!(ctx.sources.len(), 1);
        assert_eq!(ctx.sources[0].relative_path_str(), "Book.java");
    }

    #[test]
    fn line_count_matches_newline_oracle() {
        fn oracle(s: &str) -> usize {
            let newlines = s.bytes().filter(|b| *b == b'\n').count();
            newlines + usize::from(!s.is_empty() && !s.ends_with('\n'))
        }
        for s in ["", "a", "a\n", "a\nb", "a\r\nb\r\n", "\n\n", "x\n\ny"] {
            assert_eq!(SourceFile::new("f.py", s).line_count, oracle(s), "{s:?}");
        }
    }
}
