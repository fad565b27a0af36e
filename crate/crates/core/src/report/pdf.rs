//! Minimal PDF layout: flowing lines of Helvetica/Courier text with colors,
//! automatic page breaks, and PNG images converted to RGB XObjects.

use std::path::Path;

use lopdf::content::{Content, Operation};
use lopdf::{dictionary, Document, Object, ObjectId, Stream};

use super::{ReportError, TestReport, SECTION_TITLES};
use crate::callgraph::GraphRendering;
use crate::pipeline::Stage;
use crate::runner::{CoverageRecord, TestStatus};
use crate::synth::NOT_APPLICABLE;

const PAGE_W: f32 = 612.0;
const PAGE_H: f32 = 792.0;
const MARGIN: f32 = 54.0;
const BLACK: (f32, f32, f32) = (0.0, 0.0, 0.0);
const GREY: (f32, f32, f32) = (0.35, 0.35, 0.35);

#[derive(Debug, Clone, Copy, PartialEq)]
enum Font {
    Regular,
    Bold,
    Mono,
    MonoBold,
}

impl Font {
    fn resource(self) -> &'static str {
        match self {
            Font::Regular => "F1",
            Font::Bold => "F2",
            Font::Mono => "F3",
            Font::MonoBold => "F4",
        }
    }

    /// Rough average glyph width as a fraction of the font size.
    fn width_factor(self) -> f32 {
        match self {
            Font::Regular | Font::Bold => 0.52,
            Font::Mono | Font::MonoBold => 0.6,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Style {
    font: Font,
    size: f32,
    color: (f32, f32, f32),
    indent: f32,
}

impl Style {
    const fn new(font: Font, size: f32) -> Self {
        Self { font, size, color: BLACK, indent: 0.0 }
    }

    fn color(mut self, color: (f32, f32, f32)) -> Self {
        self.color = color;
        self
    }

    fn indent(mut self, indent: f32) -> Self {
        self.indent = indent;
        self
    }
}

const TITLE: Style = Style::new(Font::Bold, 18.0);
const HEADING: Style = Style::new(Font::Bold, 14.0);
const SUBHEADING: Style = Style::new(Font::Bold, 11.0);
const BODY: Style = Style::new(Font::Regular, 10.0);
const MONO: Style = Style::new(Font::Mono, 9.0);
const MONO_BOLD: Style = Style::new(Font::MonoBold, 9.0);

struct Image {
    width: u32,
    height: u32,
    rgb: Vec<u8>,
}

struct Page {
    ops: Vec<Operation>,
    images: Vec<Image>,
}

struct Layout {
    pages: Vec<Page>,
    y: f32,
}

/// WinAnsi bytes; characters outside Latin-1 become `?`.
fn encode(text: &str) -> Vec<u8> {
    text.chars()
        .map(|c| match c {
            '\t' => b' ',
            c if (c as u32) < 0x20 => b' ',
            c if (c as u32) <= 0xFF => c as u32 as u8,
            _ => b'?',
        })
        .collect()
}

fn wrap(text: &str, max_chars: usize) -> Vec<String> {
    let max_chars = max_chars.max(8);
    let mut lines = Vec::new();
    for raw in text.split('\n') {
        let chars: Vec<char> = raw.chars().collect();
        if chars.is_empty() {
            lines.push(String::new());
            continue;
        }
        let mut start = 0;
        while start < chars.len() {
            let mut end = (start + max_chars).min(chars.len());
            if end < chars.len() {
                if let Some(space) = (start + 1..end).rev().find(|&i| chars[i] == ' ') {
                    end = space + 1;
                }
            }
            lines.push(chars[start..end].iter().collect::<String>().trim_end().to_string());
            start = end;
        }
    }
    lines
}

impl Layout {
    fn new() -> Self {
        let mut layout = Layout { pages: Vec::new(), y: 0.0 };
        layout.new_page();
        layout
    }

    fn new_page(&mut self) {
        self.pages.push(Page { ops: Vec::new(), images: Vec::new() });
        self.y = PAGE_H - MARGIN;
    }

    fn page(&mut self) -> &mut Page {
        self.pages.last_mut().unwrap()
    }

    fn ensure(&mut self, height: f32) {
        if self.y - height < MARGIN {
            self.new_page();
        }
    }

    fn space(&mut self, height: f32) {
        self.y -= height;
    }

    fn text(&mut self, text: &str, style: Style) {
        let width = PAGE_W - 2.0 * MARGIN - style.indent;
        let max_chars = (width / (style.font.width_factor() * style.size)) as usize;
        let leading = style.size * 1.35;
        for line in wrap(text, max_chars) {
            self.ensure(leading);
            self.y -= leading;
            let (r, g, b) = style.color;
            let y = self.y;
            self.page().ops.extend([
                Operation::new("BT", vec![]),
                Operation::new("Tf", vec![style.font.resource().into(), style.size.into()]),
                Operation::new("rg", vec![r.into(), g.into(), b.into()]),
                Operation::new("Td", vec![(MARGIN + style.indent).into(), y.into()]),
                Operation::new("Tj", vec![Object::string_literal(encode(&line))]),
                Operation::new("ET", vec![]),
            ]);
        }
    }

    fn heading(&mut self, text: &str) {
        self.space(10.0);
        self.ensure(60.0);
        self.text(text, HEADING);
        self.space(4.0);
    }

    fn image(&mut self, image: Image) {
        let max_w = PAGE_W - 2.0 * MARGIN;
        let max_h = PAGE_H - 2.0 * MARGIN - 40.0;
        let scale = (max_w / image.width as f32).min(max_h / image.height as f32).min(1.0);
        let (w, h) = (image.width as f32 * scale, image.height as f32 * scale);
        self.ensure(h + 6.0);
        self.y -= h + 6.0;
        let y = self.y;
        let page = self.page();
        let name = format!("Im{}", page.images.len() + 1);
        page.ops.extend([
            Operation::new("q", vec![]),
            Operation::new("cm", vec![w.into(), 0.into(), 0.into(), h.into(), MARGIN.into(), y.into()]),
            Operation::new("Do", vec![Object::Name(name.into_bytes())]),
            Operation::new("Q", vec![]),
        ]);
        page.images.push(image);
    }
}

fn load_png(path: &Path) -> Option<Image> {
    let img = image::ImageReader::open(path).ok()?.with_guessed_format().ok()?.decode().ok()?.to_rgb8();
    Some(Image { width: img.width(), height: img.height(), rgb: img.into_raw() })
}

fn coverage_row(r: &CoverageRecord, file_w: usize) -> String {
    format!("{:<file_w$}  {:>10.2}  {:>10}  {:>8}", r.file, r.percent, r.statements, r.missed)
}

fn layout(report: &TestReport) -> Layout {
    let mut l = Layout::new();
    l.text("Test Report", TITLE);
    l.text(&format!("Run {}", report.run_id), BODY.color(GREY));

    l.heading(SECTION_TITLES[0]);
    if report.rationale_section.is_empty() {
        l.text("No rationale was provided.", BODY);
    }
    for group in &report.rationale_section {
        l.space(4.0);
        l.text(&format!("Source: {}", group.source_file), SUBHEADING);
        for r in &group.entries {
            l.space(2.0);
            l.text(&format!("Function: {}", r.function_name), Style::new(Font::Bold, 10.0).indent(12.0));
            for case in &r.basic_cases {
                l.text(&format!("Basic case: {case}"), BODY.indent(24.0));
            }
            if r.edge_cases.is_empty() {
                l.text(&format!("Edge cases: {NOT_APPLICABLE}"), BODY.indent(24.0));
            }
            for case in &r.edge_cases {
                l.text(&format!("Edge cases: {case}"), BODY.indent(24.0));
            }
        }
    }

    l.heading(SECTION_TITLES[1]);
    let results = &report.results_section;
    l.text(&format!("{} tests: {} passed, {} failed", results.rows.len(), results.passed, results.failed), BODY);
    l.space(4.0);
    for row in &results.rows {
        let label = match row.status {
            TestStatus::Passed => "PASSED",
            TestStatus::Failed => "FAILED",
        };
        l.text(&format!("{label}  {}", row.test_id), MONO_BOLD.color(row.color));
        if let Some(detail) = &row.detail {
            l.text(detail, MONO.color(row.color).indent(24.0));
        }
    }

    l.heading(SECTION_TITLES[2]);
    let cov = &report.coverage_section;
    let file_w = cov.records.iter().map(|r| r.file.chars().count()).max().unwrap_or(0).clamp(5, 48);
    l.text(&format!("{:<file_w$}  {:>10}  {:>10}  {:>8}", "File", "Coverage %", "Statements", "Missed"), MONO_BOLD);
    for r in &cov.records {
        l.text(&coverage_row(r, file_w), MONO);
    }
    l.text(&coverage_row(&cov.overall, file_w), MONO_BOLD);

    l.heading(SECTION_TITLES[3]);
    match &report.callgraph_section {
        GraphRendering::Image { path, dot_text } => match load_png(path) {
            Some(image) => l.image(image),
            None => {
                l.text("The rendered image could not be read; DOT source follows.", BODY.color(GREY));
                l.text(dot_text, MONO);
            }
        },
        GraphRendering::EmbeddedDot { dot_text, note } => {
            if let Some(note) = note {
                l.text(note, BODY.color(GREY));
            }
            l.text(dot_text, MONO);
        }
    }

    l.heading(SECTION_TITLES[4]);
    let timing = &report.timing_appendix;
    for stage in Stage::ALL {
        let value = match timing.duration_ms(stage) {
            Some(ms) => format!("{ms:>12.3} ms"),
            None => format!("{:>15}", "pending"),
        };
        l.text(&format!("{:<18}{value}", stage.as_str()), MONO);
    }
    l.text(&format!("{:<18}{:>12.3} ms", "total so far", timing.total_ms()), MONO_BOLD);
    l
}

fn font(doc: &mut Document, base: &str) -> ObjectId {
    doc.add_object(dictionary! {
        "Type" => "Font",
        "Subtype" => "Type1",
        "BaseFont" => base,
        "Encoding" => "WinAnsiEncoding",
    })
}

pub(super) fn render(report: &TestReport) -> Result<Vec<u8>, ReportError> {
    let enc = |e: lopdf::Error| ReportError::Encoding(e.to_string());
    let layout = layout(report);
    let mut doc = Document::with_version("1.5");
    let pages_id = doc.new_object_id();
    let fonts = dictionary! {
        "F1" => font(&mut doc, "Helvetica"),
        "F2" => font(&mut doc, "Helvetica-Bold"),
        "F3" => font(&mut doc, "Courier"),
        "F4" => font(&mut doc, "Courier-Bold"),
    };
    let fonts_id = doc.add_object(fonts);
    let mut kids = Vec::new();
    for page in layout.pages {
        let mut xobjects = lopdf::Dictionary::new();
        for (i, image) in page.images.into_iter().enumerate() {
            let stream = Stream::new(
                dictionary! {
                    "Type" => "XObject",
                    "Subtype" => "Image",
                    "Width" => image.width as i64,
                    "Height" => image.height as i64,
                    "ColorSpace" => "DeviceRGB",
                    "BitsPerComponent" => 8,
                },
                image.rgb,
            );
            xobjects.set(format!("Im{}", i + 1), doc.add_object(stream));
        }
        let content = Content { operations: page.ops }.encode().map_err(enc)?;
        let content_id = doc.add_object(Stream::new(dictionary! {}, content));
        let page_id = doc.add_object(dictionary! {
            "Type" => "Page",
            "Parent" => pages_id,
            "Contents" => content_id,
            "Resources" => dictionary! { "Font" => fonts_id, "XObject" => xobjects },
            "MediaBox" => vec![0.into(), 0.into(), PAGE_W.into(), PAGE_H.into()],
        });
        kids.push(Object::from(page_id));
    }
    let count = kids.len() as i64;
    doc.objects
        .insert(pages_id, Object::Dictionary(dictionary! { "Type" => "Pages", "Kids" => kids, "Count" => count }));
    let catalog_id = doc.add_object(dictionary! { "Type" => "Catalog", "Pages" => pages_id });
    doc.trailer.set("Root", catalog_id);
    doc.compress();
    let mut out = Vec::new();
    doc.save_to(&mut out).map_err(|e| ReportError::Encoding(e.to_string()))?;
    Ok(out)
}

/// Text content of a report, one line per text run, in page order.
pub fn extract_text(path: &Path) -> Result<String, ReportError> {
    let bytes = std::fs::read(path).map_err(|e| ReportError::io(path, e))?;
    let doc = Document::load_mem(&bytes).map_err(|e| ReportError::Encoding(e.to_string()))?;
    let pages: Vec<u32> = doc.get_pages().keys().copied().collect();
    doc.extract_text(&pages).map_err(|e| ReportError::Encoding(e.to_string()))
}
