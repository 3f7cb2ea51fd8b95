//! Line-oriented tokenizer shared by the text formats. Blank lines and lines
//! whose first non-space character is `#` are skipped.

use std::str::FromStr;

use crate::error::{Error, Result};

pub(crate) struct Line<'a> {
    pub no: usize,
    pub tokens: Vec<&'a str>,
}

impl<'a> Line<'a> {
    pub fn keyword(&self) -> &'a str {
        self.tokens[0]
    }

    pub fn expect_keyword(&self, kw: &str) -> Result<()> {
        if self.keyword() != kw {
            return Err(Error::parse(
                self.no,
                format!("expected `{kw}`, found `{}`", self.keyword()),
            ));
        }
        Ok(())
    }

    pub fn expect_len(&self, n: usize) -> Result<()> {
        if self.tokens.len() != n {
            return Err(Error::parse(
                self.no,
                format!(
                    "`{}` line needs {} fields, found {}",
                    self.keyword(),
                    n - 1,
                    self.tokens.len() - 1
                ),
            ));
        }
        Ok(())
    }

    pub fn field<T: FromStr>(&self, i: usize, name: &str) -> Result<T> {
        let tok = self
            .tokens
            .get(i)
            .ok_or_else(|| Error::parse(self.no, format!("missing field `{name}`")))?;
        tok.parse()
            .map_err(|_| Error::parse(self.no, format!("field `{name}`: cannot parse `{tok}`")))
    }

    pub fn fields_from<T: FromStr>(&self, start: usize, name: &str) -> Result<Vec<T>> {
        (start..self.tokens.len()).map(|i| self.field(i, name)).collect()
    }

    pub fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.no, msg)
    }
}

pub(crate) struct Lines<'a> {
    inner: std::iter::Peekable<Box<dyn Iterator<Item = Line<'a>> + 'a>>,
    last_no: usize,
}

impl<'a> Lines<'a> {
    pub fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = Line<'a>> + 'a> = Box::new(
            text.lines()
                .enumerate()
                .filter_map(|(i, raw)| {
                    let t = raw.trim();
                    if t.is_empty() || t.starts_with('#') {
                        None
                    } else {
                        Some(Line {
                            no: i + 1,
                            tokens: t.split_whitespace().collect(),
                        })
                    }
                }),
        );
        Lines {
            inner: it.peekable(),
            last_no: 0,
        }
    }

    pub fn next_line(&mut self, expected: &str) -> Result<Line<'a>> {
        match self.inner.next() {
            Some(l) => {
                self.last_no = l.no;
                Ok(l)
            }
            None => Err(Error::parse(
                self.last_no + 1,
                format!("unexpected end of input, expected {expected}"),
            )),
        }
    }

    pub fn peek_keyword(&mut self) -> Option<&'a str> {
        self.inner.peek().map(|l| l.tokens[0])
    }

    pub fn expect_end(&mut self) -> Result<()> {
        match self.inner.next() {
            None => Ok(()),
            Some(l) => Err(Error::parse(
                l.no,
                format!("unexpected trailing `{}` line", l.keyword()),
            )),
        }
    }
}
